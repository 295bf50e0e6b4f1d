// Copyright 2026 The mrarl Authors
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

#include <utility>

namespace mrarl {

/// One classical fourth-order Runge-Kutta step. `Y` needs `Y + double * Y`.
template <class F, class Y>
Y rk4_step(F&& f, double t, const Y& y, double h) {
  const Y k1 = f(t, y);
  const Y k2 = f(t + 0.5 * h, Y(y + (0.5 * h) * k1));
  const Y k3 = f(t + 0.5 * h, Y(y + (0.5 * h) * k2));
  const Y k4 = f(t + h, Y(y + h * k3));
  return Y(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace mrarl
