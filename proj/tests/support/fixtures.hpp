// Copyright 2026 The Authors.
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

// Hand-built event-log fixtures shared by unit and acceptance tests.

#pragma once

#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "xlog/eventlog.hpp"

namespace xlog::testing {

// Class sizes of the gynaecological-oncology hospital log.
inline const std::vector<std::pair<std::string, int>>& hospital_class_sizes() {
  static const std::vector<std::pair<std::string, int>> kSizes = {
      {"M11", 60}, {"M12", 13}, {"M13", 195}, {"M14", 95}, {"M15", 11}, {"M16", 128},
      {"106", 113}, {"821", 29}, {"822", 22}, {"823", 8},  {"839", 14}};
  return kSizes;
}

inline Schema fixture_schema() {
  Schema s;
  s.case_id = "case";
  s.activity = "Activity";
  s.timestamp = "Timestamp";
  s.department = "Department";
  s.num_executions = "Number of executions";
  s.age = "Age";
  s.diagnosis_code = "Diagnosis code";
  s.treatment_code = "Treatment code";
  return s;
}

// One case per member of each class; two events each, a spread treatment
// code whose last recorded value differs from the first.
inline std::string hospital_fixture_csv() {
  std::ostringstream csv;
  csv << "case,Activity,Timestamp,Department,Number of executions,Age,Diagnosis code,Treatment code,Treatment code:1\n";
  int id = 0;
  for (const auto& [label, count] : hospital_class_sizes()) {
    for (int i = 0; i < count; ++i, ++id) {
      const std::string case_id = "p" + std::to_string(id);
      const int age = 30 + (id * 7) % 60;
      csv << case_id << ",consult " << label << ",2005-01-0" << (1 + i % 5) << " 10:00:00,gyn,1," << age << ","
          << label << ",T" << (id % 4) << ",T9\n";
      csv << case_id << ",lab test,2006-03-1" << (i % 9) << " 08:30:00,lab,2," << age << "," << label << ",T"
          << (id % 4) << ",\n";
    }
  }
  return csv.str();
}

inline EventLog parse_text(const std::string& text, const Schema& schema) {
  std::istringstream in(text);
  return parse_log(in, schema);
}

}  // namespace xlog::testing
