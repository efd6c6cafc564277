#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rrg::model {

/// Lower-cased words; every punctuation character is its own token.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(std::span<const std::string> words);

/// Word-level vocabulary. Ids are dense from 0; ids 0-3 are PAD, BOS, SEP, EOS
/// and id 4 is the unknown-word token.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kSep = 2;
  static constexpr int kEos = 3;
  static constexpr int kUnk = 4;

  Vocabulary();

  /// Adds every word of every text, in order of first appearance.
  static Vocabulary build(std::span<const std::string> texts);

  int add(const std::string& token);
  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return ids_.contains(token); }
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<int> encode(std::string_view text) const;
  /// Drops special tokens.
  std::string decode(std::span<const int> ids) const;

  /// "token<TAB>id" per line, in id order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

}  // namespace rrg::model
