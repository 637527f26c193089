// Copyright 2026 The Aspex Authors.
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

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "aspex/common.hpp"

namespace aspex {

class TemplateError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Reader prompt, version 1. Byte-exact; trailing spaces are significant.
inline constexpr std::string_view kReaderPromptV1 = R"aspex(You are a restaurant recommendation explainer. Along with
1. a user, 2. a restaurant, you are also given
3. a model predicted user's personal query to this restaurant, 
which may not be a true statement, 
4. reviews about the restaurant and 5. reviews written by the users himself 
in the other restaurants.

With the above information, you should pinpoint a feature within the "4. restaurant 
reviews", A feature can be a dish or an aspect (eg. service, location, etc.) of the 
restaurant. The feature MUST be mentioned in the restaurant reviews. If the personal 
query mentions a feature, you can use that. The user's reviews on the other restaurants 
do not hold true for the current restaurant. You should explain why the user might like 
or dislike the feature. The explanation should be short and concise within 50 words. 
Try to summarize the opinions if there are many discussing the same feature. 
Begin your explanation with 
"You may be interested in".

User: {user} Restaurant: {item}
Personal query: {personal_query} 
Restaurant reviews (where you find the feature to recommend the user): 
{item_reviews}
User reviews (where you can refer to or identify user's preferences from): 
{user_reviews}
)aspex";

inline constexpr std::string_view kReaderPromptVersion = "reader-prompt-v1";

/// Placeholders every reader template must contain exactly once.
inline const std::vector<std::string>& reader_placeholders() {
  static const std::vector<std::string> names = {"user", "item", "personal_query", "item_reviews",
                                                 "user_reviews"};
  return names;
}

/// Substitutes every `{name}` in one left-to-right pass, so values are never
/// rescanned. Throws if the template names a placeholder missing from
/// `values`, or if a required placeholder does not occur exactly once.
inline std::string render_template(std::string_view tpl,
                                   const std::map<std::string, std::string>& values,
                                   const std::vector<std::string>& required) {
  std::map<std::string, int> seen;
  std::string out;
  out.reserve(tpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const std::size_t open = tpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    const std::size_t close = tpl.find('}', open + 1);
    out.append(tpl.substr(pos, open - pos));
    if (close == std::string_view::npos) {
      out.append(tpl.substr(open));
      break;
    }
    const std::string name(tpl.substr(open + 1, close - open - 1));
    const bool is_name = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
    if (!is_name) {
      out.push_back('{');
      pos = open + 1;
      continue;
    }
    auto it = values.find(name);
    if (it == values.end()) throw TemplateError("placeholder {" + name + "} left unfilled");
    ++seen[name];
    out.append(it->second);
    pos = close + 1;
  }
  for (const auto& r : required) {
    if (seen[r] != 1) {
      throw TemplateError("template must contain {" + r + "} exactly once, found " +
                          std::to_string(seen[r]));
    }
  }
  return out;
}

}  // namespace aspex
