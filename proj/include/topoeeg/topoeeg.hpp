#pragma once

#include "topoeeg/core.hpp"
#include "topoeeg/edf.hpp"
#include "topoeeg/ingest.hpp"
#include "topoeeg/signal.hpp"
#include "topoeeg/persistence.hpp"
#include "topoeeg/features.hpp"
#include "topoeeg/dimred.hpp"
#include "topoeeg/mlp.hpp"
#include "topoeeg/classify.hpp"
#include "topoeeg/pipeline.hpp"
