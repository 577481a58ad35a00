#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace igrl {

// Closed word-level vocabulary. Token ids are dense 0..size()-1 in the order
// the tokens were registered; the four structural tags are single atomic
// tokens. Encoding splits on whitespace, so no token string may contain a
// space.
class Vocab {
 public:
  static Vocab builtin();
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  int id(const std::string& tok) const;           // throws on unknown token
  bool contains(const std::string& tok) const { return index_.count(tok) > 0; }

  std::vector<int> encode(const std::string& text) const;
  std::string decode(std::span<const int> ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  bool is_tag(int id) const {
    return id == reasoning_open || id == reasoning_close || id == answer_open ||
           id == answer_close;
  }
  bool is_digit(int id) const;

  int bos = -1;
  int eos = -1;
  int pad = -1;
  int reasoning_open = -1;
  int reasoning_close = -1;
  int answer_open = -1;
  int answer_close = -1;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace igrl
