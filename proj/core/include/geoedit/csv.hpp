#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geoedit/autoencoder.hpp"
#include "geoedit/editor.hpp"
#include "geoedit/eval.hpp"
#include "geoedit/geometry.hpp"

namespace geoedit {

/// Shortest text that parses back to the same double.
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

/// Plain comma-separated text without quoting; fields never contain commas.
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// neuron_id,matrix,column,importance_old,importance_new,alpha,beta
void write_importance_csv(const std::filesystem::path& path, const NeuronLayout& layout, const Vector& imp_old,
                          const Vector& imp_new, const FusionWeights& weights);

// d_n,epoch,mse,kl,total
void write_ae_loss_csv(const std::filesystem::path& path, const AEBank& bank);

// neuron_id,matrix,column,d_n,angle_deg,class,degenerate
void write_angles_csv(const std::filesystem::path& path, const AngleReport& report);
/// Restores angles, classes, degenerate flags and layout; thresholds are not stored.
AngleReport read_angles_csv(const std::filesystem::path& path, double phi1 = 85.0, double phi2 = 95.0);

// bin_lo_deg,bin_hi_deg,count
void write_histogram_csv(const std::filesystem::path& path, const std::array<int, 18>& histogram);

// neuron_id,class,alpha,beta,vector_norm
void write_plan_csv(const std::filesystem::path& path, const EditPlan& plan);

// strategy,seed,reliability,generality,locality,synergistic,orthogonal,conflict
void write_ledger_header(const std::filesystem::path& path);
void append_ledger_row(const std::filesystem::path& path, const EvalReport& report);
std::vector<EvalReport> read_ledger(const std::filesystem::path& path);

// strategy,seed,phase,time_ms
void append_timing_rows(const std::filesystem::path& path, const EvalReport& report);

/// strategy,runs,<metric>_mean,<metric>_std for reliability, generality and
/// locality. The std is the sample standard deviation (0 for one run).
/// Strategies appear in first-seen order.
void write_summary_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);

}  // namespace geoedit
