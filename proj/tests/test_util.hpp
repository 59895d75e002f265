#pragma once

#include <atomic>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "qlens/error.hpp"

#define CHECK_THROWS_KIND(expr, expected_kind)                          \
  do {                                                                  \
    bool thrown_ = false;                                               \
    try {                                                               \
      (void)(expr);                                                     \
    } catch (const qlens::Error& e_) {                                  \
      thrown_ = true;                                                   \
      CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());           \
    }                                                                   \
    CHECK_MESSAGE(thrown_, "no qlens::Error from " #expr);              \
  } while (0)

/// Unique scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    const auto tick = std::chrono::steady_clock::now().time_since_epoch().count();
    path = std::filesystem::temp_directory_path() /
           ("qlens-test-" + std::to_string(tick) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};
