#pragma once

#include <cstdio>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

namespace corral {

// Consumer of structured log events (one JSON object per event). Events
// carry a virtual timestamp "t" in microseconds plus an "event" kind.
using EventSink = std::function<void(const nlohmann::json&)>;

// Writes events as compact JSON lines. Thread-safe.
class JsonlWriter {
 public:
  // Opens `path` for writing (truncates). Returns nullptr on failure.
  static std::unique_ptr<JsonlWriter> open(const std::string& path);
  // Wraps an already-open stream (e.g. stdout); does not close it.
  static std::unique_ptr<JsonlWriter> wrap(std::FILE* stream);

  ~JsonlWriter();

  void write(const nlohmann::json& event);
  void flush();

  EventSink sink() {
    return [this](const nlohmann::json& e) { write(e); };
  }

 private:
  JsonlWriter(std::FILE* f, bool owned) : file_(f), owned_(owned) {}

  std::mutex mu_;
  std::FILE* file_;
  bool owned_;
};

}  // namespace corral
