// SPDX-License-Identifier: Apache-2.0
//
// thzisac: THz integrated sensing and communication simulation library
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

#ifndef THZISAC_THZISAC_HPP
#define THZISAC_THZISAC_HPP

#include "channel.hpp"
#include "common.hpp"
#include "geometry.hpp"
#include "golden_section.hpp"
#include "isi_ici.hpp"
#include "precoding.hpp"
#include "sensing_rx.hpp"
#include "waveform.hpp"

#endif
