#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "domaug/corpus.hpp"

namespace domaug::testing {

class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("domaug_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_docs(const std::filesystem::path& p, const std::vector<Document>& docs) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  for (const auto& d : docs) write_jsonl_line(out, to_json(d));
}

inline Document make_doc(std::string id, std::string text, std::string source = "test") {
  Document d;
  d.id = std::move(id);
  d.token_count = count_tokens(text);
  d.text = std::move(text);
  d.source = std::move(source);
  return d;
}

// Two classes with disjoint 50-word vocabularies ("p0".."p49" vs "n0".."n49").
inline std::vector<Document> disjoint_class_docs(bool positive, std::size_t count,
                                                 std::uint64_t seed, std::size_t words = 12) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 49);
  std::vector<Document> docs;
  const std::string prefix = positive ? "p" : "n";
  for (std::size_t i = 0; i < count; ++i) {
    std::string text;
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text += ' ';
      text += prefix + std::to_string(pick(rng));
    }
    docs.push_back(make_doc(prefix + "-" + std::to_string(seed) + "-" + std::to_string(i), text));
  }
  return docs;
}

}  // namespace domaug::testing
