#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace cslt {

// Deterministic word-level tokenizer. Vocabulary order is the special
// tokens followed by the lexicographically sorted training words, so the
// same training split always yields identical ids.
class Tokenizer {
 public:
  Tokenizer() = default;

  static const std::vector<std::string>& special_names();

  // Builds the vocabulary from training texts (targets plus any gloss
  // strings that must be embeddable).
  static Tokenizer build(const std::vector<std::string>& texts);
  static Tokenizer from_vocab(std::vector<std::string> vocab);

  // Lowercase, whitespace split, leading/trailing punctuation detached as
  // separate tokens.
  static std::vector<std::string> split_words(const std::string& text);

  std::vector<int> tokenize(const std::string& text) const;
  std::vector<int> ids_of_words(const std::vector<std::string>& words) const;
  std::string detokenize(const std::vector<int>& ids) const;

  int id_of(const std::string& word) const;  // UNK when absent
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(vocab_.size()); }
  const std::vector<std::string>& vocab() const { return vocab_; }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace cslt
