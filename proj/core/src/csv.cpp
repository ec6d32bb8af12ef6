#include "geoedit/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "geoedit/error.hpp"

namespace geoedit {

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("not a number: '" + s + "'", line);
    }
}

std::string optional_int(const std::optional<ClassCounts>& c, int ClassCounts::*field) {
    return c ? std::to_string((*c).*field) : std::string();
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v || std::isnan(v)) break;
    }
    return buf;
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw SchemaError("missing column '" + name + "'", 1);
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw SchemaError("expected " + std::to_string(table.header.size()) + " fields, got " +
                                  std::to_string(fields.size()),
                              n);
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    auto out = open_out(path, std::ios::trunc);
    auto emit = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
        out << '\n';
    };
    emit(table.header);
    for (const auto& r : table.rows) emit(r);
}

void write_importance_csv(const std::filesystem::path& path, const NeuronLayout& layout, const Vector& imp_old,
                          const Vector& imp_new, const FusionWeights& weights) {
    const auto n = static_cast<Eigen::Index>(layout.size());
    if (imp_old.size() != n || imp_new.size() != n || weights.alpha.size() != n || weights.beta.size() != n) {
        throw ShapeError("importance csv: lengths differ from the layout");
    }
    CsvTable t{{"neuron_id", "matrix", "column", "importance_old", "importance_new", "alpha", "beta"}, {}};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = layout[static_cast<std::size_t>(i)];
        t.rows.push_back({std::to_string(i), std::string(to_string(e.matrix)), std::to_string(e.column),
                          format_double(imp_old(i)), format_double(imp_new(i)), format_double(weights.alpha(i)),
                          format_double(weights.beta(i))});
    }
    write_csv(path, t);
}

void write_ae_loss_csv(const std::filesystem::path& path, const AEBank& bank) {
    CsvTable t{{"d_n", "epoch", "mse", "kl", "total"}, {}};
    for (const auto& m : bank.models) {
        for (const auto& p : m.loss_curve) {
            t.rows.push_back({std::to_string(m.input_dim()), std::to_string(p.epoch), format_double(p.mse),
                              format_double(p.kl), format_double(p.total)});
        }
    }
    write_csv(path, t);
}

void write_angles_csv(const std::filesystem::path& path, const AngleReport& report) {
    CsvTable t{{"neuron_id", "matrix", "column", "d_n", "angle_deg", "class", "degenerate"}, {}};
    for (std::size_t i = 0; i < report.angles_deg.size(); ++i) {
        const auto& e = report.layout[i];
        t.rows.push_back({std::to_string(i), std::string(to_string(e.matrix)), std::to_string(e.column),
                          std::to_string(e.dim), format_double(report.angles_deg[i]),
                          std::string(to_string(report.classes[i])), std::to_string(report.degenerate[i])});
    }
    write_csv(path, t);
}

AngleReport read_angles_csv(const std::filesystem::path& path, double phi1, double phi2) {
    const CsvTable t = read_csv(path);
    const auto c_matrix = t.column("matrix");
    const auto c_column = t.column("column");
    const auto c_dim = t.column("d_n");
    const auto c_angle = t.column("angle_deg");
    const auto c_class = t.column("class");
    const auto c_deg = t.column("degenerate");
    AngleReport r;
    r.phi1 = phi1;
    r.phi2 = phi2;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t line = i + 2;
        try {
            r.layout.entries.push_back({matrix_id_from_string(row[c_matrix]), std::stoi(row[c_column]), std::stoi(row[c_dim])});
            r.classes.push_back(edit_class_from_string(row[c_class]));
            r.degenerate.push_back(static_cast<std::uint8_t>(std::stoi(row[c_deg])));
        } catch (const std::logic_error&) {
            throw ParseError("malformed angle row", line);
        } catch (const Error& e) {
            throw SchemaError(e.what(), line);
        }
        r.angles_deg.push_back(parse_double(row[c_angle], line));
    }
    r.histogram = angle_histogram(r.angles_deg);
    return r;
}

void write_histogram_csv(const std::filesystem::path& path, const std::array<int, 18>& histogram) {
    CsvTable t{{"bin_lo_deg", "bin_hi_deg", "count"}, {}};
    for (std::size_t b = 0; b < histogram.size(); ++b) {
        t.rows.push_back({std::to_string(10 * b), std::to_string(10 * (b + 1)), std::to_string(histogram[b])});
    }
    write_csv(path, t);
}

void write_plan_csv(const std::filesystem::path& path, const EditPlan& plan) {
    CsvTable t{{"neuron_id", "class", "alpha", "beta", "vector_norm"}, {}};
    for (std::size_t i = 0; i < plan.classes.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        t.rows.push_back({std::to_string(i), std::string(to_string(plan.classes[i])), format_double(plan.alpha(k)),
                          format_double(plan.beta(k)), format_double(plan.tau_edit.vectors[i].norm())});
    }
    write_csv(path, t);
}

void write_ledger_header(const std::filesystem::path& path) {
    auto out = open_out(path, std::ios::trunc);
    out << "strategy,seed,reliability,generality,locality,synergistic,orthogonal,conflict\n";
}

void append_ledger_row(const std::filesystem::path& path, const EvalReport& r) {
    if (!std::filesystem::exists(path)) write_ledger_header(path);
    auto out = open_out(path, std::ios::app);
    out << r.strategy << ',' << r.seed << ',' << format_double(r.reliability) << ',' << format_double(r.generality)
        << ',' << format_double(r.locality) << ',' << optional_int(r.class_counts, &ClassCounts::synergistic) << ','
        << optional_int(r.class_counts, &ClassCounts::orthogonal) << ','
        << optional_int(r.class_counts, &ClassCounts::conflict) << '\n';
}

std::vector<EvalReport> read_ledger(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    std::vector<EvalReport> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t line = i + 2;
        EvalReport r;
        r.strategy = row[t.column("strategy")];
        try {
            r.seed = std::stoull(row[t.column("seed")]);
        } catch (const std::logic_error&) {
            throw ParseError("bad seed", line);
        }
        r.reliability = parse_double(row[t.column("reliability")], line);
        r.generality = parse_double(row[t.column("generality")], line);
        r.locality = parse_double(row[t.column("locality")], line);
        const auto& syn = row[t.column("synergistic")];
        if (!syn.empty()) {
            r.class_counts = ClassCounts{std::stoi(syn), std::stoi(row[t.column("orthogonal")]),
                                         std::stoi(row[t.column("conflict")])};
        }
        out.push_back(std::move(r));
    }
    return out;
}

void append_timing_rows(const std::filesystem::path& path, const EvalReport& r) {
    const bool fresh = !std::filesystem::exists(path);
    auto out = open_out(path, std::ios::app);
    if (fresh) out << "strategy,seed,phase,time_ms\n";
    for (const auto& [phase, ms] : r.wall_time_ms) {
        out << r.strategy << ',' << r.seed << ',' << phase << ',' << format_double(ms) << '\n';
    }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
    std::vector<std::string> order;
    for (const auto& r : reports) {
        if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);
    }
    CsvTable t{{"strategy", "runs", "reliability_mean", "reliability_std", "generality_mean", "generality_std",
                "locality_mean", "locality_std"},
               {}};
    for (const auto& s : order) {
        std::vector<std::string> row{s};
        std::vector<const EvalReport*> runs;
        for (const auto& r : reports) {
            if (r.strategy == s) runs.push_back(&r);
        }
        row.push_back(std::to_string(runs.size()));
        for (double EvalReport::*metric : {&EvalReport::reliability, &EvalReport::generality, &EvalReport::locality}) {
            double mean = 0.0;
            for (const auto* r : runs) mean += r->*metric;
            mean /= static_cast<double>(runs.size());
            double var = 0.0;
            for (const auto* r : runs) var += (r->*metric - mean) * (r->*metric - mean);
            const double sd = runs.size() > 1 ? std::sqrt(var / static_cast<double>(runs.size() - 1)) : 0.0;
            row.push_back(format_double(mean));
            row.push_back(format_double(sd));
        }
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

}  // namespace geoedit
