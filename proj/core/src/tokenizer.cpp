#include "cslt/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "cslt/errors.hpp"
#include "cslt/model.hpp"
#include "cslt/text.hpp"

namespace cslt {

namespace {
bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\'';
}
}  // namespace

const std::vector<std::string>& Tokenizer::special_names() {
  static const std::vector<std::string> names = {"<pad>", "<bos>", "<eos>", "<unk>", "<sep>"};
  return names;
}

std::vector<std::string> Tokenizer::split_words(const std::string& text) {
  std::vector<std::string> out;
  for (const std::string& raw : split_ws(to_lower_ascii(text))) {
    std::size_t start = 0, end = raw.size();
    std::vector<std::string> lead, trail;
    while (start < end && !is_word_char(raw[start])) {
      lead.emplace_back(1, raw[start]);
      ++start;
    }
    while (end > start && !is_word_char(raw[end - 1])) {
      trail.emplace_back(1, raw[end - 1]);
      --end;
    }
    for (auto& t : lead) out.push_back(std::move(t));
    if (end > start) out.push_back(raw.substr(start, end - start));
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) out.push_back(std::move(*it));
  }
  return out;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& texts) {
  std::set<std::string> words;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) words.insert(std::move(w));
  }
  std::vector<std::string> vocab = special_names();
  vocab.insert(vocab.end(), words.begin(), words.end());
  return from_vocab(std::move(vocab));
}

Tokenizer Tokenizer::from_vocab(std::vector<std::string> vocab) {
  const auto& specials = special_names();
  if (vocab.size() < specials.size()) {
    throw ConfigError(concat("vocabulary too small: ", vocab.size()));
  }
  for (std::size_t i = 0; i < specials.size(); ++i) {
    if (vocab[i] != specials[i]) {
      throw ConfigError(concat("vocabulary slot ", i, " must be ", specials[i], ", got ",
                               vocab[i]));
    }
  }
  Tokenizer tok;
  tok.vocab_ = std::move(vocab);
  for (int i = 0; i < static_cast<int>(tok.vocab_.size()); ++i) {
    if (!tok.index_.emplace(tok.vocab_[i], i).second) {
      throw ConfigError(concat("duplicate vocabulary entry: ", tok.vocab_[i]));
    }
  }
  return tok;
}

std::vector<int> Tokenizer::tokenize(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id_of(w));
  return ids;
}

std::vector<int> Tokenizer::ids_of_words(const std::vector<std::string>& words) const {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id_of(w));
  return ids;
}

std::string Tokenizer::detokenize(const std::vector<int>& ids) const {
  std::vector<std::string> words;
  for (int id : ids) {
    if (id == SpecialTokens::Pad || id == SpecialTokens::Bos || id == SpecialTokens::Eos ||
        id == SpecialTokens::Sep) {
      continue;
    }
    words.push_back(token_of(id));
  }
  return join(words);
}

int Tokenizer::id_of(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? SpecialTokens::Unk : it->second;
}

const std::string& Tokenizer::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw VocabError(concat("token id ", id, " outside vocabulary of size ", size()));
  }
  return vocab_[static_cast<std::size_t>(id)];
}

}  // namespace cslt
