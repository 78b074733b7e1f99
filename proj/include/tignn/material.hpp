/*
 * Copyright 2026 The tignn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "tignn/types.hpp"

#include <vector>

namespace tignn {

struct PronyTerm {
  Scalar g = 0;    // relative modulus, (0,1)
  Scalar tau = 1;  // relaxation time [s]
};

// Compressible Mooney-Rivlin with a Prony series on the isochoric stress.
// Units are whatever the caller uses consistently; nothing is converted.
struct MaterialParams {
  Scalar c10 = 1.5e5;
  Scalar c01 = 5e3;
  Scalar d1 = 1e-7;
  Scalar density = 1e3;
  std::vector<PronyTerm> prony;

  Scalar shear_modulus() const { return 2 * (c10 + c01); }
  Scalar bulk_modulus() const { return 2 / d1; }

  // Throws InvalidArgument when a parameter is out of range.
  void validate() const;
};

// Beam material: hyperelastic constants and the two-term Prony series.
MaterialParams beam_material();

}  // namespace tignn
