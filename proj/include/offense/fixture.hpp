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

#include <cstdint>
#include <string>
#include <vector>

#include "offense/rng.hpp"

namespace offense::fixture {

// Synthetic Reddit-like corpus with planted offensive vocabulary. Every
// output is a pure function of the config.
struct FixtureConfig {
  std::size_t comments = 5000;
  std::size_t authors = 600;
  std::size_t labeled_rows = 2000;
  std::uint64_t seed = 2024;
  std::int64_t start_utc = 1420070400;  // 2015-01-01
  std::int64_t end_utc = 1498867200;    // 2017-07-01
  double deleted_share = 0.02;
  double short_share = 0.03;
  double malformed_share = 0.005;
  double label_noise = 0.04;
};

struct Fixture {
  std::string comments_jsonl;  // raw dump, including lines ingest rejects
  std::string labeled_csv;     // _unit_id,text,class,confidence
  std::string lexicon_a;
  std::string lexicon_b;
};

Fixture generate(const FixtureConfig& cfg);

// Writes comments.jsonl, labeled.csv, lexicon_a.txt and lexicon_b.txt.
void write_fixture(const Fixture& f, const std::string& dir);

// Random comment text in the fixture vocabulary.
std::string offensive_text(Rng& rng, bool political);
std::string neutral_text(Rng& rng, bool political);

// Subreddit names used by the generator; the first five are political.
const std::vector<std::string>& fixture_subreddits();

}  // namespace offense::fixture
