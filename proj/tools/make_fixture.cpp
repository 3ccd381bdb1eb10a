/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Regenerates the bundled synthetic corpus: make_fixture <dir> [seed] [comments]
#include <cstdlib>
#include <iostream>

#include "offense/fixture.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_fixture <dir> [seed] [comments]\n";
    return 1;
  }
  offense::fixture::FixtureConfig cfg;
  if (argc > 2) cfg.seed = std::strtoull(argv[2], nullptr, 10);
  if (argc > 3) cfg.comments = std::strtoull(argv[3], nullptr, 10);
  offense::fixture::write_fixture(offense::fixture::generate(cfg), argv[1]);
  return 0;
}
