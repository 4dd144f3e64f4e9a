/*
 * Copyright 2026 The DeX Engine Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DEX_DEX_HPP
#define DEX_DEX_HPP

#include "dex/arithmetic.hpp"
#include "dex/classifier.hpp"
#include "dex/core.hpp"
#include "dex/countex.hpp"
#include "dex/errors.hpp"
#include "dex/explanation_io.hpp"
#include "dex/manifest.hpp"
#include "dex/metrics.hpp"
#include "dex/parallel.hpp"
#include "dex/providers.hpp"
#include "dex/random.hpp"
#include "dex/robustness.hpp"
#include "dex/scenarios.hpp"
#include "dex/selection.hpp"
#include "dex/world.hpp"

#endif  // DEX_DEX_HPP
