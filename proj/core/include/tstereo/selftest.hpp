#pragma once

#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace tstereo {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Collects named pass/fail checks; exceptions inside a check count as failures.
class CheckRecorder {
 public:
  void check(const std::string& name, bool passed, const std::string& detail = {});
  void near(const std::string& name, double actual, double expected, double tolerance = 1e-6);

  /// Runs `body`; any escaping exception fails the check.
  void run(const std::string& name, const std::function<bool()>& body);

  /// Passes iff `body` throws an exception of type E.
  template <typename E>
  void expect_throw(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const E&) {
      check(name, true);
      return;
    } catch (const std::exception& e) {
      check(name, false, std::string("unexpected exception: ") + e.what());
      return;
    }
    check(name, false, "no exception");
  }

  const std::vector<SelftestCheck>& checks() const noexcept { return checks_; }
  std::size_t failures() const;

 private:
  std::vector<SelftestCheck> checks_;
};

/// Runs the exact-value example suite of the library. `scratch` must be a
/// writable directory for the file-format checks.
void run_library_selftest(CheckRecorder& rec, const std::filesystem::path& scratch);

}  // namespace tstereo
