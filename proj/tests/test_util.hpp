#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "vimlop/error.hpp"

template <class F>
vimlop::ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const vimlop::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no vimlop::Error thrown";
  return vimlop::ErrorCode::kConfig;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("vimlop_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};
