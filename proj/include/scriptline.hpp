// Copyright 2026 The scriptline Authors. All Rights Reserved.
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

#include "scriptline/binary_io.hpp"
#include "scriptline/bof.hpp"
#include "scriptline/config.hpp"
#include "scriptline/corpus.hpp"
#include "scriptline/dsift.hpp"
#include "scriptline/error.hpp"
#include "scriptline/eval.hpp"
#include "scriptline/frame_sequence.hpp"
#include "scriptline/hmm.hpp"
#include "scriptline/imaging.hpp"
#include "scriptline/log.hpp"
#include "scriptline/parallel.hpp"
#include "scriptline/pipeline.hpp"
#include "scriptline/sae.hpp"
