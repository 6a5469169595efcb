// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace laln {

/// Token table. Reserved symbols come first; the rest are ordered by
/// descending training frequency, ties broken lexicographically.
class Vocab {
 public:
  Vocab() = default;
  Vocab(std::vector<std::string> reserved, const std::map<std::string, std::size_t>& counts, std::size_t cutoff);
  static Vocab from_tokens(std::vector<std::string> tokens, bool has_unk);

  std::size_t size() const { return tokens_.size(); }
  bool has_unk() const { return has_unk_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  bool contains(const std::string& tok) const { return index_.count(tok) != 0; }
  // Unknown tokens map to id 0 when the table has <unk>; otherwise InputError.
  std::size_t id(const std::string& tok) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  bool has_unk_ = false;
};

inline const std::vector<std::string>& source_reserved() {
  static const std::vector<std::string> r = {"<unk>"};
  return r;
}
inline const std::vector<std::string>& target_reserved() {
  static const std::vector<std::string> r = {"<unk>", "<bos>", "<eos>"};
  return r;
}

}  // namespace laln
