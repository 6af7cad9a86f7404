#pragma once

#include <stdexcept>
#include <string>

namespace siamgrid {

/// Error categories shared by every module. The CLI maps them onto exit codes.
enum class error_kind {
  dimension,
  contract,
  numeric,
  schema,
  row,
  io,
  config,
  dependency,
};

inline const char* to_string(error_kind kind) noexcept {
  switch (kind) {
    case error_kind::dimension: return "dimension";
    case error_kind::contract: return "contract";
    case error_kind::numeric: return "numeric";
    case error_kind::schema: return "schema";
    case error_kind::row: return "row";
    case error_kind::io: return "io";
    case error_kind::config: return "config";
    case error_kind::dependency: return "dependency";
  }
  return "unknown";
}

class error : public std::runtime_error {
public:
  error(error_kind kind, const std::string& message)
      : std::runtime_error(message), m_kind(kind) {}

  error_kind kind() const noexcept { return m_kind; }

private:
  error_kind m_kind;
};

struct dimension_error : error {
  explicit dimension_error(const std::string& m) : error(error_kind::dimension, m) {}
};
struct contract_error : error {
  explicit contract_error(const std::string& m) : error(error_kind::contract, m) {}
};
struct numeric_error : error {
  explicit numeric_error(const std::string& m) : error(error_kind::numeric, m) {}
};
struct schema_error : error {
  explicit schema_error(const std::string& m) : error(error_kind::schema, m) {}
};
struct row_error : error {
  row_error(std::size_t row, const std::string& m)
      : error(error_kind::row, "row " + std::to_string(row) + ": " + m), m_row(row) {}
  std::size_t row() const noexcept { return m_row; }

private:
  std::size_t m_row;
};
struct io_error : error {
  explicit io_error(const std::string& m) : error(error_kind::io, m) {}
};
struct config_error : error {
  explicit config_error(const std::string& m) : error(error_kind::config, m) {}
};
struct dependency_error : error {
  explicit dependency_error(const std::string& m) : error(error_kind::dependency, m) {}
};

}  // namespace siamgrid
