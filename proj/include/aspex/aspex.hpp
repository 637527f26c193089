// Copyright 2026 The Aspex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "aspex/common.hpp"
#include "aspex/corpus/feature_index.hpp"
#include "aspex/corpus/inventory.hpp"
#include "aspex/corpus/io.hpp"
#include "aspex/corpus/review.hpp"
#include "aspex/corpus/segmentation.hpp"
#include "aspex/corpus/split.hpp"
#include "aspex/corpus/tokenizer.hpp"
#include "aspex/inference/aspect_selection.hpp"
#include "aspex/inference/elbow.hpp"
#include "aspex/inference/generate.hpp"
#include "aspex/metrics/embedding.hpp"
#include "aspex/metrics/latent.hpp"
#include "aspex/metrics/ranking.hpp"
#include "aspex/metrics/report.hpp"
#include "aspex/metrics/text_metrics.hpp"
#include "aspex/model/aspect_head.hpp"
#include "aspex/model/autograd.hpp"
#include "aspex/model/decoder.hpp"
#include "aspex/model/explainer.hpp"
#include "aspex/model/losses.hpp"
#include "aspex/model/prompt.hpp"
#include "aspex/rag/pipeline.hpp"
#include "aspex/rag/pool.hpp"
#include "aspex/rag/prompt_template.hpp"
#include "aspex/rag/reader.hpp"
#include "aspex/training/optimizer.hpp"
#include "aspex/training/trainer.hpp"
