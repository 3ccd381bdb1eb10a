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

#include <stdexcept>
#include <string>

namespace offense {

// Root of every error the library throws. The CLI maps the three branches
// below onto exit codes 1 (usage), 2 (data) and 3 (provenance).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ProvenanceError : public Error {
 public:
  using Error::Error;
};

#define OFFENSE_DEFINE_ERROR(Name, Base) \
  class Name : public Base {             \
   public:                               \
    using Base::Base;                    \
  }

OFFENSE_DEFINE_ERROR(ConfigError, UsageError);

// corpus
OFFENSE_DEFINE_ERROR(MalformedLine, DataError);
OFFENSE_DEFINE_ERROR(BeforeAnchor, DataError);

// embedding
OFFENSE_DEFINE_ERROR(EmptyVocabulary, DataError);
OFFENSE_DEFINE_ERROR(NonFiniteUpdate, DataError);
OFFENSE_DEFINE_ERROR(ModelFormatError, DataError);
OFFENSE_DEFINE_ERROR(ChecksumMismatch, ModelFormatError);

// hatemodel
OFFENSE_DEFINE_ERROR(NoLexiconWordInVocabulary, DataError);
OFFENSE_DEFINE_ERROR(ProvenanceMismatch, ProvenanceError);

// classifier
OFFENSE_DEFINE_ERROR(MalformedRow, DataError);
OFFENSE_DEFINE_ERROR(UnknownClassLabel, DataError);
OFFENSE_DEFINE_ERROR(EmptyTrainingSet, DataError);
OFFENSE_DEFINE_ERROR(TooFewSamples, DataError);
OFFENSE_DEFINE_ERROR(DegenerateSplit, DataError);
OFFENSE_DEFINE_ERROR(EmptyEvaluationSet, DataError);

// analytics
OFFENSE_DEFINE_ERROR(UnknownDestination, DataError);

#undef OFFENSE_DEFINE_ERROR

}  // namespace offense
