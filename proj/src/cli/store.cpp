#include "siamgrid/cli/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "siamgrid/cli/config.hpp"
#include "siamgrid/errors.hpp"

namespace siamgrid::cli {

namespace fs = std::filesystem;

namespace {

class file_lock {
public:
  explicit file_lock(const fs::path& path) : m_fd(::open(path.c_str(), O_RDWR | O_CREAT, 0644)) {
    if (m_fd < 0 || ::flock(m_fd, LOCK_EX) != 0) throw io_error("cannot lock " + path.string());
  }
  ~file_lock() {
    ::flock(m_fd, LOCK_UN);
    ::close(m_fd);
  }
  file_lock(const file_lock&) = delete;
  file_lock& operator=(const file_lock&) = delete;

private:
  int m_fd;
};

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

run_store::run_store(fs::path root) : m_root(std::move(root)) {
  std::error_code ec;
  fs::create_directories(m_root, ec);
  if (ec) throw io_error("cannot create run store " + m_root.string() + ": " + ec.message());
}

fs::path run_store::run_dir(const std::string& phase, const std::string& fingerprint) const {
  return m_root / (phase + "-" + fingerprint.substr(0, 12));
}

std::vector<protocols::run_record> run_store::records() const {
  std::vector<protocols::run_record> out;
  std::ifstream in(m_root / "index.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(protocols::parse_run_record(line));
  }
  return out;
}

std::optional<protocols::run_record> run_store::find(const std::string& fingerprint) const {
  std::optional<protocols::run_record> found;
  for (auto& r : records()) {
    if (r.fingerprint == fingerprint) found = std::move(r);
  }
  return found;
}

void run_store::append(const protocols::run_record& record) {
  file_lock lock(m_root / "index.lock");
  std::ofstream out(m_root / "index.jsonl", std::ios::app);
  out << protocols::to_json_line(record) << '\n';
  if (!out.flush()) throw io_error("cannot append to " + (m_root / "index.jsonl").string());
}

fs::path default_store_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SIAMGRID_STORE"); env && *env) return env;
  return "runs";
}

std::string directory_fingerprint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw dependency_error("checkpoint directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::string text;
  for (const auto& f : files) text += f.generic_string() + "\n" + sha256_hex(read_bytes(dir / f)) + "\n";
  return sha256_hex(text);
}

}  // namespace siamgrid::cli
