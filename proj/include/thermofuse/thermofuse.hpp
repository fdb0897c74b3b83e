#pragma once

#include "thermofuse/error.hpp"
#include "thermofuse/amino_acids.hpp"
#include "thermofuse/nncore.hpp"
#include "thermofuse/structure.hpp"
#include "thermofuse/features.hpp"
#include "thermofuse/embeddings.hpp"
#include "thermofuse/fusion.hpp"
#include "thermofuse/metrics.hpp"
#include "thermofuse/dataset.hpp"
#include "thermofuse/corpus.hpp"
#include "thermofuse/training.hpp"
#include "thermofuse/analysis.hpp"
#include "thermofuse/io.hpp"
#include "thermofuse/scan.hpp"
#include "thermofuse/report.hpp"
#include "thermofuse/service.hpp"
