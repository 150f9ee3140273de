// Copyright 2026 The Authors.
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

// Umbrella header.

#pragma once

#include "xlog/container.hpp"
#include "xlog/core.hpp"
#include "xlog/csv.hpp"
#include "xlog/encode.hpp"
#include "xlog/eventlog.hpp"
#include "xlog/explain.hpp"
#include "xlog/forest.hpp"
#include "xlog/latent.hpp"
#include "xlog/report.hpp"
#include "xlog/seqnet.hpp"
#include "xlog/svg.hpp"
#include "xlog/synth.hpp"
