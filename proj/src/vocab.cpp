#include "igrl/vocab.hpp"

#include <sstream>
#include <stdexcept>

namespace igrl {

namespace {

// The full closed token universe for the synthetic task suites. Order is the
// id assignment and must stay stable: serialized corpora, checkpoints and
// logs all assume it.
const char* kBuiltinTokens[] = {
    // structural
    "<bos>", "<eos>", "<pad>", "<reasoning>", "</reasoning>", "<answer>", "</answer>",
    // digits
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    // option letters
    "A", "B", "C", "D",
    // label inventory (multi-label tasks, also the marked lexicon default)
    "arson", "bribery", "forgery", "larceny", "perjury", "rioting", "smuggling", "trespass",
    // clue words, two per label
    "blaze", "embers", "kickback", "envelope", "signature", "inkpad", "lockpick", "satchel",
    "oath", "testimony", "mob", "barricade", "crate", "border", "fence", "notice",
    // code words (multiple-choice keys)
    "alpha", "bravo", "delta", "kappa", "omega", "sigma", "theta", "zeta",
    // template and trace words
    "case", "facts", "charges", "apply", "which", "counts", "total", "term", "in", "months",
    "statute", "code", "is", "options", "choose", "one", "sum", "product", "of", "and", "amount",
    "clue", "implies", "suggests", "therefore", "are", "option", "matches", "so", "respond",
    "with", "the", "answer", "only", "think", "step", "by", "use", "tags", "then",
    // punctuation
    ";", "?", ":", ",", ".",
};

}  // namespace

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  v.tokens_ = tokens;
  v.index_.reserve(tokens.size());
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    if (!v.index_.emplace(tokens[i], i).second) {
      throw std::invalid_argument("duplicate vocabulary token: " + tokens[i]);
    }
    if (tokens[i].find(' ') != std::string::npos) {
      throw std::invalid_argument("vocabulary token contains a space: " + tokens[i]);
    }
  }
  auto find = [&v](const char* t) {
    auto it = v.index_.find(t);
    return it == v.index_.end() ? -1 : it->second;
  };
  v.bos = find("<bos>");
  v.eos = find("<eos>");
  v.pad = find("<pad>");
  v.reasoning_open = find("<reasoning>");
  v.reasoning_close = find("</reasoning>");
  v.answer_open = find("<answer>");
  v.answer_close = find("</answer>");
  return v;
}

Vocab Vocab::builtin() {
  std::vector<std::string> toks;
  for (const char* t : kBuiltinTokens) {
    toks.emplace_back(t);
  }
  return from_tokens(toks);
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<size_t>(id)];
}

int Vocab::id(const std::string& tok) const {
  auto it = index_.find(tok);
  if (it == index_.end()) {
    throw std::invalid_argument("unknown token: '" + tok + "'");
  }
  return it->second;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> out;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    out.push_back(id(word));
  }
  return out;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) {
      out.push_back(' ');
    }
    out += token(ids[i]);
  }
  return out;
}

bool Vocab::is_digit(int id) const {
  const std::string& t = token(id);
  return t.size() == 1 && t[0] >= '0' && t[0] <= '9';
}

}  // namespace igrl
