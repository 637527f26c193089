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

#include <string>
#include <vector>

#include <json.hpp>

#include "aspex/common.hpp"
#include "aspex/rag/prompt_template.hpp"

namespace aspex {

struct ReaderPrompt {
  std::string user;
  std::string item;
  std::string personal_query;
  std::vector<std::string> item_reviews;
  std::vector<std::string> user_reviews;
  std::string text;
};

/// Backslashes and line breaks are escaped so every review stays on one
/// bullet line and distinct lists render distinctly.
inline std::string escape_review(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\r') {
      out += "\\r";
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline std::string render_bullets(const std::vector<std::string>& reviews) {
  std::string out;
  for (std::size_t k = 0; k < reviews.size(); ++k) {
    if (k) out += '\n';
    out += "- " + escape_review(reviews[k]);
  }
  return out;
}

inline ReaderPrompt build_reader_prompt(std::string user, std::string item, std::string personal_query,
                                        std::vector<std::string> item_reviews,
                                        std::vector<std::string> user_reviews,
                                        std::string_view tpl = kReaderPromptV1) {
  if (text::trim(personal_query).empty()) throw InvalidArgument("reader prompt: empty personal query");
  if (item_reviews.empty()) throw InvalidArgument("reader prompt: no item reviews");
  if (user_reviews.empty()) throw InvalidArgument("reader prompt: no user reviews");
  ReaderPrompt p{std::move(user), std::move(item), std::move(personal_query),
                 std::move(item_reviews), std::move(user_reviews), {}};
  p.text = render_template(tpl,
                           {{"user", p.user},
                            {"item", p.item},
                            {"personal_query", escape_review(p.personal_query)},
                            {"item_reviews", render_bullets(p.item_reviews)},
                            {"user_reviews", render_bullets(p.user_reviews)}},
                           reader_placeholders());
  return p;
}

class ReaderError : public Error {
 public:
  ReaderError(const std::string& what, std::string prompt)
      : Error(what), prompt_(std::move(prompt)) {}
  /// The fully rendered prompt, kept for a retry.
  const std::string& prompt() const { return prompt_; }

 private:
  std::string prompt_;
};

/// Turns a rendered prompt into the final explanation.
class Reader {
 public:
  virtual ~Reader() = default;
  virtual std::string complete(const ReaderPrompt& prompt) = 0;
  virtual std::string name() const = 0;
};

/// Returns the personal query unchanged.
class EchoReader : public Reader {
 public:
  std::string complete(const ReaderPrompt& prompt) override { return prompt.personal_query; }
  std::string name() const override { return "echo"; }
};

class CannedReader : public Reader {
 public:
  explicit CannedReader(std::string reply) : reply_(std::move(reply)) {}
  std::string complete(const ReaderPrompt&) override { return reply_; }
  std::string name() const override { return "canned"; }

 private:
  std::string reply_;
};

}  // namespace aspex
