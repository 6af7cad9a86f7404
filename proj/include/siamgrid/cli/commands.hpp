#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "siamgrid/evalkit/report.hpp"
#include "siamgrid/protocols/protocols.hpp"

namespace siamgrid::cli {

/// Exit codes of the command-line tool.
inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_dependency = 3;
inline constexpr int exit_runtime = 4;

/**
 * Runs one invocation, e.g. {"siamgrid", "pretrain", "--config", "a.ini"}.
 * Results go to `out`; failures print a human line and a one-line JSON
 * record {"error":{"code":..,"kind":..,"message":..}} to `err`.
 */
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Pairwise results table with columns aug1,aug2,macro_auroc,hamming_loss,ranking_error.
/// A row with NA metrics is read as a failed cell.
std::vector<protocols::sweep_row> read_sweep_table(const std::filesystem::path& path);

/// Inverse of read_sweep_table; failed cells carry NA metrics.
std::string render_sweep_csv(const std::vector<protocols::sweep_row>& rows);

/// Horizontal bar chart of macro AUROC per row.
std::string render_svg(const std::vector<evalkit::report_row>& rows);

}  // namespace siamgrid::cli
