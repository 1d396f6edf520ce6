#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qnet/graph.hpp"
#include "qnet/protocol.hpp"

namespace qnet {

inline constexpr const char* kVersion = "1.0.0";

/// Bad command-line input; maps to exit code 2.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Mean and spread of the P_m outcome counts over independent samples.
struct PmRow {
    int m = 0;
    double mean = 0.0;
    double std = 0.0;
    double expected = 0.0;             // exact binomial expectation
    double expected_asymptotic = 0.0;  // c^m/m! N^{m(z+1)+1}
};

struct PmSummary {
    int N = 0;
    double z = 0.0;
    double c_coeff = 0.0;
    double p = 0.0;
    int samples = 0;
    std::vector<PmRow> rows;
};

PmSummary summarize_pm(int N, double z, double c_coeff, int samples, int m_max, std::uint64_t seed,
                       unsigned threads);

/// Tidy CSV tables (LF line endings, header first).
std::string sweep_csv(const SweepResult& r);
std::string pm_csv(const PmSummary& s);
std::string traces_csv(const std::vector<ProtocolTrace>& traces);

nlohmann::ordered_json to_json(const SweepResult& r);
nlohmann::ordered_json to_json(const PmSummary& s);

/// Writes `content` to `path`; throws std::runtime_error when it cannot.
void emit_plotdata(const std::string& content, const std::string& path);

/// FNV-1a 64 of the bytes, as 16 hex digits.
std::string digest_hex(const std::string& bytes);

/// Entry point of qnetlab. Returns 0 on success, 2 on invalid input and 1
/// on internal failure. Output goes to --out, or `out` when it is absent.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace qnet
