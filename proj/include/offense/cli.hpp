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

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "offense/classifier.hpp"
#include "offense/hatemodel.hpp"

namespace offense::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitProvenance = 3;

// Entry point of offensectl. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// Same, with `args` excluding the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Hate-vector score of each text as a one-feature sample.
std::vector<classifier::LabeledSample> featurize(const std::vector<classifier::LabeledText>& texts,
                                                 const hatemodel::HateScorer& scorer, unsigned workers = 1);

}  // namespace offense::cli
