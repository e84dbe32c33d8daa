// Copyright 2026 The dualdiv Authors.
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

#include "dualdiv/embeddings.hpp"
#include "dualdiv/error.hpp"
#include "dualdiv/kernel.hpp"
#include "dualdiv/objective.hpp"
#include "dualdiv/oracle.hpp"
#include "dualdiv/prompt.hpp"
#include "dualdiv/run.hpp"
#include "dualdiv/selector.hpp"
#include "dualdiv/synthetic.hpp"
