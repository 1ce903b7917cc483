// Copyright 2026 The wkam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Umbrella header.

#include "wkam/assignment.hpp"
#include "wkam/audit.hpp"
#include "wkam/calibration.hpp"
#include "wkam/cell_solver.hpp"
#include "wkam/config_file.hpp"
#include "wkam/config_space.hpp"
#include "wkam/csv.hpp"
#include "wkam/discounted.hpp"
#include "wkam/errors.hpp"
#include "wkam/flow.hpp"
#include "wkam/measures.hpp"
#include "wkam/model.hpp"
#include "wkam/oracle.hpp"
#include "wkam/parallel.hpp"
#include "wkam/particle_array.hpp"
#include "wkam/trig_potential.hpp"
