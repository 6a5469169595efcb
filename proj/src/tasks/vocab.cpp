// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/tasks/vocab.hpp"

#include <algorithm>

#include "laln/error.hpp"

namespace laln {

Vocab::Vocab(std::vector<std::string> reserved, const std::map<std::string, std::size_t>& counts, std::size_t cutoff)
    : tokens_(std::move(reserved)) {
  has_unk_ = !tokens_.empty() && tokens_[0] == "<unk>";
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= cutoff && std::find(tokens_.begin(), tokens_.end(), tok) == tokens_.end()) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (auto& [tok, n] : kept) tokens_.push_back(tok);
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = i;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens, bool has_unk) {
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.has_unk_ = has_unk;
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], i).second) throw InputError("duplicate vocabulary entry '" + v.tokens_[i] + "'");
  }
  return v;
}

std::size_t Vocab::id(const std::string& tok) const {
  auto it = index_.find(tok);
  if (it != index_.end()) return it->second;
  if (has_unk_) return 0;
  throw InputError("token '" + tok + "' is not in the vocabulary");
}

}  // namespace laln
