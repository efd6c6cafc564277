#include "rrg/model/tokenizer.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rrg::model {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c) && ch != '-' && ch != '_') {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<bos>", "<sep>", "<eos>", "<unk>"}) add(t);
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  Vocabulary v;
  for (const auto& text : texts) {
    for (const auto& w : split_words(text)) v.add(w);
  }
  return v;
}

int Vocabulary::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> out;
  for (const auto& w : split_words(text)) out.push_back(id(w));
  return out;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> words;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kSep || id == kEos) continue;
    words.push_back(token(id));
  }
  return join_words(words);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("vocabulary: cannot write " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocabulary: cannot read " + path.string());
  Vocabulary v;
  v.tokens_.clear();
  v.ids_.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("vocabulary: line " + std::to_string(line_no) + " lacks a tab");
    }
    const std::string token = line.substr(0, tab);
    const int id = std::stoi(line.substr(tab + 1));
    if (id != static_cast<int>(v.tokens_.size())) {
      throw std::runtime_error("vocabulary: ids must be dense and ordered (line " +
                               std::to_string(line_no) + ")");
    }
    v.tokens_.push_back(token);
    v.ids_.emplace(token, id);
  }
  if (v.tokens_.size() < 5 || v.tokens_[0] != "<pad>" || v.tokens_[1] != "<bos>" ||
      v.tokens_[2] != "<sep>" || v.tokens_[3] != "<eos>") {
    throw std::runtime_error("vocabulary: special tokens must occupy ids 0-3");
  }
  return v;
}

}  // namespace rrg::model
