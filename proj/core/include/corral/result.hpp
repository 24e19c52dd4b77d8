#pragma once

#include <cassert>
#include <string>
#include <utility>
#include <variant>

namespace corral {

enum class Errc {
  key_conflict,
  invariant_violation,
  corrupt_journal,
  io_error,
  syntax_error,
  not_found,
  already_terminal,
  validation,
  bad_filter,
  illegal_transition,
  unavailable,
};

const char* errc_name(Errc code);

struct Error {
  Errc code;
  std::string message;

  std::string to_string() const;
};

// Minimal value-or-error carrier used across the store and service layers.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Error err) : v_(std::move(err)) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  T& value() & {
    assert(ok());
    return std::get<T>(v_);
  }
  const T& value() const& {
    assert(ok());
    return std::get<T>(v_);
  }
  T&& take() {
    assert(ok());
    return std::move(std::get<T>(v_));
  }

  const Error& error() const {
    assert(!ok());
    return std::get<Error>(v_);
  }

 private:
  std::variant<T, Error> v_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() = default;
  Result(Error err) : err_(std::move(err)), failed_(true) {}

  bool ok() const { return !failed_; }
  explicit operator bool() const { return ok(); }

  const Error& error() const {
    assert(failed_);
    return err_;
  }

 private:
  Error err_{};
  bool failed_ = false;
};

inline Error make_error(Errc code, std::string message) {
  return Error{code, std::move(message)};
}

}  // namespace corral
