#include "corral/events.hpp"

namespace corral {

std::unique_ptr<JsonlWriter> JsonlWriter::open(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) return nullptr;
  return std::unique_ptr<JsonlWriter>(new JsonlWriter(f, true));
}

std::unique_ptr<JsonlWriter> JsonlWriter::wrap(std::FILE* stream) {
  return std::unique_ptr<JsonlWriter>(new JsonlWriter(stream, false));
}

JsonlWriter::~JsonlWriter() {
  if (owned_) {
    std::fclose(file_);
  } else {
    std::fflush(file_);
  }
}

void JsonlWriter::write(const nlohmann::json& event) {
  std::string line = event.dump();
  line.push_back('\n');
  std::lock_guard lock(mu_);
  std::fwrite(line.data(), 1, line.size(), file_);
}

void JsonlWriter::flush() {
  std::lock_guard lock(mu_);
  std::fflush(file_);
}

}  // namespace corral
