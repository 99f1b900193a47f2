#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hypertab::text {

// Whitespace splits tokens; every ASCII punctuation character is a token of
// its own; all other bytes (letters, digits, '_', UTF-8) group into words.
std::vector<std::string> split_tokens(std::string_view s);

// Joins tokens with single spaces except before , . ; : ? ! ) and after (.
// split_tokens(join_tokens(x)) == x for any x produced by split_tokens.
std::string join_tokens(const std::vector<std::string>& tokens);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kStructure = 4;
  static constexpr int kReserved = 5;

  Vocab();
  // Reserved ids first, then the distinct tokens of `texts` in sorted order.
  static Vocab build(const std::vector<std::string>& texts);

  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<int> encode(std::string_view s) const;
  std::string decode(const std::vector<int>& ids) const;  // skips reserved ids

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);
  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace hypertab::text
