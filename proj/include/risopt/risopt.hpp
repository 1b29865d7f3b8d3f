// SPDX-License-Identifier: Apache-2.0
//
// risopt — joint transmit beamforming and RIS phase-shift optimization
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "risopt/channel_model.hpp"
#include "risopt/experiment.hpp"
#include "risopt/fp_bcd.hpp"
#include "risopt/model.hpp"
#include "risopt/rcg.hpp"
#include "risopt/rng.hpp"
#include "risopt/ssca.hpp"
#include "risopt/wmmse.hpp"
