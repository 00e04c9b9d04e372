// Copyright 2026 The protorec Authors
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

namespace protorec {

// Every parallel kernel in this project is a map over independent output
// slots followed by an ordered serial reduction, so serial and parallel
// policies produce bit-identical results. The serial path is the reference
// implementation used by tests and the benchmark.
enum class ExecPolicy { serial, parallel };

template <class F>
void par_for(ExecPolicy exec, int n, F&& f) {
  if (exec == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) f(i);
  } else {
    for (int i = 0; i < n; ++i) f(i);
  }
}

}  // namespace protorec
