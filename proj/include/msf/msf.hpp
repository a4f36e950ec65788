// Copyright 2026 The msf-snn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "msf/checkpoint.hpp"
#include "msf/common.hpp"
#include "msf/config.hpp"
#include "msf/corpus_io.hpp"
#include "msf/event.hpp"
#include "msf/metrics.hpp"
#include "msf/model.hpp"
#include "msf/pipeline.hpp"
#include "msf/snn.hpp"
#include "msf/synth.hpp"
#include "msf/tape.hpp"
#include "msf/tensor.hpp"
#include "msf/training.hpp"
