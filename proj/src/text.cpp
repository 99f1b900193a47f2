#include "hypertab/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "hypertab/error.hpp"

namespace hypertab::text {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_punct(unsigned char c) {
  return c < 0x80 && !is_space(c) && !(c >= '0' && c <= '9') && !(c >= 'a' && c <= 'z') &&
         !(c >= 'A' && c <= 'Z') && c != '_' && c >= 0x20;
}

bool attaches_left(const std::string& t) {
  return t == "," || t == "." || t == ";" || t == ":" || t == "?" || t == "!" || t == ")";
}

}  // namespace

std::vector<std::string> split_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string word;
  const auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char c : s) {
    if (is_space(c) || c < 0x20) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      word.push_back(static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && !attaches_left(tokens[i]) && tokens[i - 1] != "(") out += ' ';
    out += tokens[i];
  }
  return out;
}

Vocab::Vocab() {
  for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>", "<structure>"}) add(t);
}

void Vocab::add(const std::string& token) {
  if (index_.count(token)) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocab Vocab::build(const std::vector<std::string>& texts) {
  std::set<std::string> all;
  for (const auto& t : texts) {
    for (auto& tok : split_tokens(t)) all.insert(std::move(tok));
  }
  Vocab v;
  for (const auto& tok : all) v.add(tok);
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    fail(ErrorCode::kInvalidArgument, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(std::string_view s) const {
  std::vector<int> ids;
  for (const auto& t : split_tokens(s)) ids.push_back(id(t));
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> toks;
  for (int i : ids) {
    if (i >= kReserved) toks.push_back(token(i));
  }
  return join_tokens(toks);
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (std::size_t i = kReserved; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) v.add(line);
  }
  return v;
}

}  // namespace hypertab::text
