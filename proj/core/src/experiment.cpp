#include "geoedit/experiment.hpp"

#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "geoedit/archive.hpp"
#include "geoedit/csv.hpp"
#include "geoedit/error.hpp"
#include "geoedit/random.hpp"

namespace geoedit {

namespace {

using Timings = std::vector<std::pair<std::string, double>>;

// Reads one config section, rejecting keys it does not know.
class Section {
public:
    Section(const nlohmann::json& root, std::string name) : name_(std::move(name)) {
        if (!root.contains(name_)) throw ConfigError("config is missing the [" + name_ + "] section");
        node_ = &root.at(name_);
        if (!node_->is_object()) throw ConfigError("config section [" + name_ + "] must be an object");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!node_->contains(key)) return;
        try {
            out = node_->at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("[" + name_ + "] " + key + " has the wrong type");
        }
    }

    const nlohmann::json* raw(const std::string& key) {
        seen_.insert(key);
        return node_->contains(key) ? &node_->at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [key, value] : node_->items()) {
            if (!seen_.count(key)) throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
        }
    }

private:
    std::string name_;
    const nlohmann::json* node_ = nullptr;
    std::set<std::string> seen_;
};

void read_train(Section s, TrainConfig& t) {
    s.get("epochs", t.epochs);
    s.get("batch_size", t.batch_size);
    s.get("learning_rate", t.learning_rate);
    s.get("ema_beta", t.ema_beta);
    s.get("editable_only", t.editable_only);
    std::string opt = t.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd";
    s.get("optimizer", opt);
    if (opt == "adam") t.optimizer.kind = OptimizerKind::Adam;
    else if (opt == "sgd") t.optimizer.kind = OptimizerKind::Sgd;
    else throw ConfigError("optimizer must be 'adam' or 'sgd', got '" + opt + "'");
    s.finish();
}

nlohmann::ordered_json train_json(const TrainConfig& t) {
    return {{"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"learning_rate", t.learning_rate},
            {"optimizer", t.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd"},
            {"ema_beta", t.ema_beta},
            {"editable_only", t.editable_only}};
}

TrainConfig seeded(TrainConfig t, std::uint64_t seed, std::string_view stage) {
    t.seed = derive_seed(seed, stage);
    return t;
}

FusionWeights weights_from(const ImportanceTracker& old_t, const ImportanceTracker& new_t, const NeuronLayout& layout) {
    return fusion_weights(neuron_importance(old_t, layout), neuron_importance(new_t, layout));
}

std::filesystem::path require(const std::filesystem::path& p, std::string_view producer) {
    if (!std::filesystem::exists(p)) {
        throw IoError(p.string() + " not found; run `geoedit " + std::string(producer) + "` first");
    }
    return p;
}

void write_loss_curve(const std::filesystem::path& path, const std::vector<double>& curve) {
    CsvTable t{{"epoch", "loss"}, {}};
    for (std::size_t e = 0; e < curve.size(); ++e) t.rows.push_back({std::to_string(e + 1), format_double(curve[e])});
    write_csv(path, t);
}

std::string file_tag(Strategy s) {
    std::string tag(to_string(s));
    for (auto& c : tag) {
        if (c == '-') c = '_';
    }
    return tag;
}

std::string method_tag(AngleMethod m) {
    std::string tag(to_string(m));
    for (auto& c : tag) {
        if (c == '-') c = '_';
    }
    return tag;
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

struct Loaded {
    FactDataset data;
    ModelParams base;
};

Loaded load_base(const std::filesystem::path& dir) {
    return {load_jsonl(require(dir / "data.jsonl", "gen-data")), load_model(require(dir / "base.ckpt", "pretrain"))};
}

Extraction load_extraction(const std::filesystem::path& dir) {
    Extraction ex;
    ex.tau_old = load_task_vectors(require(dir / "tau_old.ckpt", "extract"));
    ex.tau_new = load_task_vectors(require(dir / "tau_new.ckpt", "extract"));
    ex.importance_old = load_importance(require(dir / "importance_old.ckpt", "extract"));
    ex.importance_new = load_importance(require(dir / "importance_new.ckpt", "extract"));
    ex.weights = weights_from(ex.importance_old, ex.importance_new, ex.tau_old.layout);
    if (std::filesystem::exists(dir / "extract.json")) {
        std::ifstream in(dir / "extract.json");
        const auto j = nlohmann::json::parse(in);
        ex.ft_old_ms = j.at("ft_old_ms").get<double>();
        ex.ft_new_ms = j.at("ft_new_ms").get<double>();
    }
    return ex;
}

void save_extraction(const std::filesystem::path& dir, const Extraction& ex) {
    save_task_vectors(ex.tau_old, dir / "tau_old.ckpt");
    save_task_vectors(ex.tau_new, dir / "tau_new.ckpt");
    save_importance(ex.importance_old, dir / "importance_old.ckpt");
    save_importance(ex.importance_new, dir / "importance_new.ckpt");
    write_importance_csv(dir / "importance.csv", ex.tau_old.layout, neuron_importance(ex.importance_old, ex.tau_old.layout),
                         neuron_importance(ex.importance_new, ex.tau_old.layout), ex.weights);
    // Timings live outside the checkpoints so reruns stay byte-identical.
    write_json(dir / "extract.json", nlohmann::ordered_json{{"ft_old_ms", ex.ft_old_ms}, {"ft_new_ms", ex.ft_new_ms}});
}

void save_edit(const std::filesystem::path& dir, Strategy s, const EditOutcome& out) {
    save_model(out.edited, dir / ("edited_" + file_tag(s) + ".ckpt"));
    if (out.plan) write_plan_csv(dir / ("plan_" + file_tag(s) + ".csv"), *out.plan);
    nlohmann::ordered_json t = nlohmann::ordered_json::object();
    for (const auto& [phase, ms] : out.wall_time_ms) t[phase] = ms;
    nlohmann::ordered_json meta;
    meta["strategy"] = std::string(to_string(s));
    meta["wall_time_ms"] = t;
    if (out.plan) {
        meta["class_counts"] = {{"synergistic", out.plan->counts.synergistic},
                                {"orthogonal", out.plan->counts.orthogonal},
                                {"conflict", out.plan->counts.conflict}};
    }
    write_json(dir / ("edit_" + file_tag(s) + ".json"), meta);
}

template <class F>
auto staged(const std::string& stage, const std::filesystem::path& dir, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        std::filesystem::create_directories(dir);
        std::ofstream marker(dir / "FAILED", std::ios::trunc);
        marker << stage << ": " << e.what() << '\n';
        throw StageError(stage, e.what());
    }
}

}  // namespace

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::GeoEdit: return "geoedit";
        case Strategy::GeoEditMw: return "geoedit-mw";
        case Strategy::NoSynergistic: return "no-synergistic";
        case Strategy::NoOrthogonal: return "no-orthogonal";
        case Strategy::NoConflict: return "no-conflict";
        case Strategy::FullFt: return "full-ft";
        case Strategy::FLearning: return "f-learning";
        case Strategy::NaiveAdd: return "naive-add";
    }
    return "geoedit";
}

Strategy strategy_from_string(std::string_view name) {
    std::string n(name);
    for (auto& c : n) {
        if (c == '_') c = '-';
    }
    for (const Strategy s : {Strategy::GeoEdit, Strategy::GeoEditMw, Strategy::NoSynergistic, Strategy::NoOrthogonal,
                             Strategy::NoConflict, Strategy::FullFt, Strategy::FLearning, Strategy::NaiveAdd}) {
        if (to_string(s) == n) return s;
    }
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

bool uses_plan(Strategy s) {
    return s != Strategy::FullFt && s != Strategy::FLearning && s != Strategy::NaiveAdd;
}

EditMode edit_mode_for(Strategy s) {
    switch (s) {
        case Strategy::GeoEditMw: return EditMode::GeoEditMw;
        case Strategy::NoSynergistic: return EditMode::NoSynergistic;
        case Strategy::NoOrthogonal: return EditMode::NoOrthogonal;
        case Strategy::NoConflict: return EditMode::NoConflict;
        default: return EditMode::GeoEdit;
    }
}

ExperimentConfig desk_config() {
    ExperimentConfig c;
    c.pretrain.epochs = 3;
    c.pretrain.batch_size = 1;
    c.pretrain.learning_rate = 0.005;
    c.pretrain.optimizer.kind = OptimizerKind::Adam;
    c.pretrain.editable_only = false;
    c.finetune.epochs = 100;
    c.finetune.batch_size = 16;
    c.finetune.learning_rate = 0.5;
    c.finetune.optimizer.kind = OptimizerKind::Sgd;
    c.ae.epochs = 40;
    c.ae.learning_rate = 0.01;
    c.tsne.iterations = 500;
    c.strategies = {Strategy::GeoEdit,      Strategy::GeoEditMw, Strategy::NoSynergistic, Strategy::NoOrthogonal,
                    Strategy::NoConflict,   Strategy::FullFt,    Strategy::FLearning,     Strategy::NaiveAdd};
    c.seeds = {1, 2, 3, 4, 5};
    return c;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    ExperimentConfig c = desk_config();
    {
        Section s(j, "model");
        s.get("vocab_size", c.model.vocab_size);
        s.get("seq_len", c.model.seq_len);
        s.get("embed_dim", c.model.embed_dim);
        s.get("hidden_dim", c.model.hidden_dim);
        if (const auto* m = s.raw("editable_matrices")) {
            if (!m->is_array()) throw ConfigError("[model] editable_matrices must be a list");
            c.model.editable_matrices.clear();
            for (const auto& id : *m) {
                if (!id.is_string()) throw ConfigError("[model] editable_matrices entries must be strings");
                c.model.editable_matrices.push_back(matrix_id_from_string(id.get<std::string>()));
            }
        }
        s.finish();
    }
    {
        Section s(j, "data");
        s.get("n_facts", c.data.n_facts);
        s.get("n_edits", c.data.n_edits);
        s.get("n_rephrases", c.data.n_rephrases);
        s.finish();
    }
    read_train(Section(j, "pretrain"), c.pretrain);
    read_train(Section(j, "finetune"), c.finetune);
    {
        Section s(j, "ae");
        s.get("lambda", c.ae.lambda);
        s.get("probe_size", c.ae.probe_size);
        s.get("neurons_per_kl_step", c.ae.neurons_per_kl_step);
        s.get("epochs", c.ae.epochs);
        s.get("batch_size", c.ae.batch_size);
        s.get("learning_rate", c.ae.learning_rate);
        s.finish();
    }
    {
        Section s(j, "tsne");
        s.get("perplexity", c.tsne.perplexity);
        s.get("iterations", c.tsne.iterations);
        s.get("exaggeration", c.tsne.exaggeration);
        s.get("exaggeration_iters", c.tsne.exaggeration_iters);
        s.get("momentum_switch_iter", c.tsne.momentum_switch_iter);
        s.get("learning_rate", c.tsne.learning_rate);
        s.finish();
    }
    {
        Section s(j, "edit");
        s.get("phi1_deg", c.edit.phi1_deg);
        s.get("phi2_deg", c.edit.phi2_deg);
        s.get("manual_alpha", c.edit.manual_alpha);
        s.get("manual_beta", c.edit.manual_beta);
        s.get("flearning_gamma", c.flearning_gamma);
        std::string method(to_string(c.method));
        s.get("method", method);
        c.method = angle_method_from_string(method);
        s.finish();
    }
    {
        Section s(j, "eval");
        if (const auto* list = s.raw("strategies")) {
            if (!list->is_array()) throw ConfigError("[eval] strategies must be a list");
            c.strategies.clear();
            for (const auto& name : *list) {
                if (!name.is_string()) throw ConfigError("[eval] strategies entries must be strings");
                c.strategies.push_back(strategy_from_string(name.get<std::string>()));
            }
        }
        s.finish();
    }
    if (!j.contains("seeds")) throw ConfigError("config is missing the [seeds] section");
    if (!j.at("seeds").is_array()) throw ConfigError("[seeds] must be a list of non-negative integers");
    c.seeds.clear();
    for (const auto& s : j.at("seeds")) {
        if (!s.is_number_unsigned()) throw ConfigError("[seeds] must be a list of non-negative integers");
        c.seeds.push_back(s.get<std::uint64_t>());
    }
    if (!j.contains("output_dir")) throw ConfigError("config is missing the [output_dir] section");
    if (!j.at("output_dir").is_string()) throw ConfigError("[output_dir] must be a string");
    c.output_dir = j.at("output_dir").get<std::string>();
    for (const auto& [key, value] : j.items()) {
        static const std::set<std::string> known{"model", "data", "pretrain", "finetune", "ae", "tsne",
                                                 "edit",  "eval", "seeds",    "output_dir"};
        if (!known.count(key)) throw ConfigError("unknown config section '" + key + "'");
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json model;
    model["vocab_size"] = this->model.vocab_size;
    model["seq_len"] = this->model.seq_len;
    model["embed_dim"] = this->model.embed_dim;
    model["hidden_dim"] = this->model.hidden_dim;
    model["editable_matrices"] = nlohmann::ordered_json::array();
    for (const auto m : this->model.editable_matrices) model["editable_matrices"].push_back(std::string(geoedit::to_string(m)));
    j["model"] = model;
    j["data"] = {{"n_facts", data.n_facts}, {"n_edits", data.n_edits}, {"n_rephrases", data.n_rephrases}};
    j["pretrain"] = train_json(pretrain);
    j["finetune"] = train_json(finetune);
    j["ae"] = {{"lambda", ae.lambda},     {"probe_size", ae.probe_size}, {"neurons_per_kl_step", ae.neurons_per_kl_step},
               {"epochs", ae.epochs},     {"batch_size", ae.batch_size}, {"learning_rate", ae.learning_rate}};
    j["tsne"] = {{"perplexity", tsne.perplexity},
                 {"iterations", tsne.iterations},
                 {"exaggeration", tsne.exaggeration},
                 {"exaggeration_iters", tsne.exaggeration_iters},
                 {"momentum_switch_iter", tsne.momentum_switch_iter},
                 {"learning_rate", tsne.learning_rate}};
    j["edit"] = {{"phi1_deg", edit.phi1_deg},         {"phi2_deg", edit.phi2_deg},
                 {"manual_alpha", edit.manual_alpha}, {"manual_beta", edit.manual_beta},
                 {"flearning_gamma", flearning_gamma}, {"method", std::string(geoedit::to_string(method))}};
    j["eval"]["strategies"] = nlohmann::ordered_json::array();
    for (const auto s : strategies) j["eval"]["strategies"].push_back(std::string(geoedit::to_string(s)));
    j["seeds"] = seeds;
    j["output_dir"] = output_dir.string();
    return j;
}

void ExperimentConfig::validate() const {
    model.validate();
    pretrain.validate();
    finetune.validate();
    edit.validate();
    if (data.n_facts < 2) throw ConfigError("[data] n_facts must be at least 2");
    if (data.n_edits < 1 || data.n_edits >= data.n_facts) {
        throw ConfigError("[data] n_edits must lie in [1, n_facts) so that a locality set remains");
    }
    if (data.n_rephrases < 1) throw ConfigError("[data] n_rephrases must be at least 1");
    if (!(ae.lambda >= 0.0) || ae.probe_size < 1 || ae.neurons_per_kl_step < 1 || ae.epochs < 0 ||
        ae.batch_size < 1 || !(ae.learning_rate > 0.0)) {
        throw ConfigError("[ae] invalid hyper-parameters");
    }
    if (tsne.iterations < 1) throw ConfigError("[tsne] iterations must be positive");
    if (!(flearning_gamma >= 0.0)) throw ConfigError("[edit] flearning_gamma must be >= 0");
    if (strategies.empty()) throw ConfigError("[eval] strategies must not be empty");
    if (seeds.empty()) throw ConfigError("[seeds] must not be empty");
}

FactDataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    return generate_synthetic(cfg.data.n_facts, cfg.data.n_edits, cfg.data.n_rephrases, cfg.model.vocab_size,
                              cfg.model.seq_len, derive_seed(seed, "data"));
}

FinetuneResult pretrain_base(const ExperimentConfig& cfg, const FactDataset& data, std::uint64_t seed) {
    ModelConfig mc = cfg.model;
    mc.seed = derive_seed(seed, "init");
    const auto corpus = data.pretrain_corpus();
    return finetune(init_model(mc), corpus, seeded(cfg.pretrain, seed, "pretrain"));
}

Extraction extract_task_vectors(const ExperimentConfig& cfg, const ModelParams& base, const FactDataset& data,
                                std::uint64_t seed) {
    const NeuronLayout layout = NeuronLayout::for_config(base.config);
    const auto d_old = data.d_old_targets();
    const auto d_new = data.d_new();
    Extraction ex;
    FinetuneResult ft_old;
    FinetuneResult ft_new;
    ex.ft_old_ms = benchmark_edit_time([&] { ft_old = finetune(base, d_old, seeded(cfg.finetune, seed, "ft_old")); });
    ex.ft_new_ms = benchmark_edit_time([&] { ft_new = finetune(base, d_new, seeded(cfg.finetune, seed, "ft_new")); });
    ex.tau_old = extract(base, ft_old.final_params, layout, TaskVectorSource::Old);
    ex.tau_new = extract(base, ft_new.final_params, layout, TaskVectorSource::New);
    ex.importance_old = std::move(ft_old.tracker);
    ex.importance_new = std::move(ft_new.tracker);
    ex.weights = weights_from(ex.importance_old, ex.importance_new, layout);
    return ex;
}

AEBank train_autoencoders(const ExperimentConfig& cfg, const ModelParams& base, const FactDataset& data,
                          const Extraction& ex, std::uint64_t seed) {
    AEConfig shared = cfg.ae;
    shared.seed = derive_seed(seed, "ae");
    return train_ae_bank(ex.tau_old, ex.tau_new, base, data, shared);
}

AngleReport compute_angles(const ExperimentConfig& cfg, const Extraction& ex, const AEBank* ae, AngleMethod method,
                           std::uint64_t seed) {
    TsneConfig t = cfg.tsne;
    t.seed = derive_seed(seed, "tsne");
    return angle_pipeline(ex.tau_old, ex.tau_new, ae, method, t, cfg.edit.phi1_deg, cfg.edit.phi2_deg);
}

EditOutcome apply_plan_strategy(const ExperimentConfig& cfg, const ModelParams& base, const Extraction& ex,
                                const AngleReport& report, Strategy strategy) {
    if (!uses_plan(strategy)) throw ConfigError("strategy '" + std::string(to_string(strategy)) + "' has no edit plan");
    EditConfig ec = cfg.edit;
    ec.mode = edit_mode_for(strategy);
    EditOutcome out;
    EditPlan plan;
    out.wall_time_ms.emplace_back("plan", benchmark_edit_time([&] { plan = build_plan(ex.tau_old, ex.tau_new, report, ex.weights, ec); }));
    out.wall_time_ms.emplace_back("apply", benchmark_edit_time([&] { out.edited = edit_geoedit(base, plan); }));
    out.plan = std::move(plan);
    return out;
}

EditOutcome run_geoedit(const ExperimentConfig& cfg, const ModelParams& base, const FactDataset& data,
                        const Extraction& ex, Strategy strategy, AngleMethod method, std::uint64_t seed) {
    Timings t;
    AEBank bank;
    if (method == AngleMethod::AeTsne) {
        t.emplace_back("ae_train", benchmark_edit_time([&] { bank = train_autoencoders(cfg, base, data, ex, seed); }));
    }
    AngleReport report;
    t.emplace_back("angles", benchmark_edit_time([&] {
                       report = compute_angles(cfg, ex, method == AngleMethod::AeTsne ? &bank : nullptr, method, seed);
                   }));
    EditOutcome out = apply_plan_strategy(cfg, base, ex, report, strategy);
    t.insert(t.end(), out.wall_time_ms.begin(), out.wall_time_ms.end());
    out.wall_time_ms = std::move(t);
    return out;
}

EditOutcome run_baseline(const ExperimentConfig& cfg, const ModelParams& base, const FactDataset& data,
                         const Extraction& ex, Strategy strategy, std::uint64_t seed) {
    const auto d_new = data.d_new();
    const TrainConfig tc = seeded(cfg.finetune, seed, "ft_new");
    EditOutcome out;
    switch (strategy) {
        case Strategy::FullFt:
            out.wall_time_ms.emplace_back("finetune", benchmark_edit_time([&] { out.edited = baseline_full_ft(base, d_new, tc); }));
            break;
        case Strategy::FLearning:
            out.wall_time_ms.emplace_back("finetune", benchmark_edit_time([&] {
                                              out.edited = baseline_flearning(base, ex.tau_old, d_new, cfg.flearning_gamma, tc);
                                          }));
            break;
        case Strategy::NaiveAdd:
            out.wall_time_ms.emplace_back("apply", benchmark_edit_time([&] { out.edited = baseline_naive_add(base, ex.tau_new); }));
            break;
        default:
            throw ConfigError("strategy '" + std::string(to_string(strategy)) + "' is not a baseline");
    }
    return out;
}

EvalReport evaluate(const ModelParams& edited, const ModelParams& base, const FactDataset& data, Strategy strategy,
                    std::uint64_t seed, const std::optional<EditPlan>& plan, Timings wall_time_ms) {
    EvalReport r;
    r.strategy = std::string(to_string(strategy));
    r.seed = seed;
    r.reliability = reliability(edited, data.d_new());
    r.generality = generality(edited, data.rephrase_new());
    r.locality = locality(edited, base, data.locality_set());
    if (plan) r.class_counts = plan->counts;
    r.wall_time_ms = std::move(wall_time_ms);
    return r;
}

std::filesystem::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
    return cfg.output_dir / ("seed_" + std::to_string(seed));
}

void cmd_gen_data(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto dir = seed_dir(cfg, seed);
    staged("gen-data", dir, [&] {
        const FactDataset data = make_dataset(cfg, seed);
        std::filesystem::create_directories(dir);
        save_jsonl(data, dir / "data.jsonl");
        spdlog::info("seed {}: {} facts, {} edit targets", seed, data.size(), data.edit_count());
    });
}

void cmd_pretrain(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto dir = seed_dir(cfg, seed);
    staged("pretrain", dir, [&] {
        const FactDataset data = load_jsonl(require(dir / "data.jsonl", "gen-data"));
        const FinetuneResult pre = pretrain_base(cfg, data, seed);
        save_model(pre.final_params, dir / "base.ckpt");
        write_loss_curve(dir / "pretrain_loss.csv", pre.loss_curve);
        spdlog::info("seed {}: pretrained, final loss {:.4f}, old-knowledge accuracy {:.1f}%", seed,
                     pre.loss_curve.empty() ? 0.0 : pre.loss_curve.back(),
                     reliability(pre.final_params, data.d_old()));
    });
}

void cmd_extract(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto dir = seed_dir(cfg, seed);
    staged("extract", dir, [&] {
        const Loaded in = load_base(dir);
        save_extraction(dir, extract_task_vectors(cfg, in.base, in.data, seed));
    });
}

void cmd_train_ae(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto dir = seed_dir(cfg, seed);
    staged("train-ae", dir, [&] {
        const Loaded in = load_base(dir);
        const Extraction ex = load_extraction(dir);
        const AEBank bank = train_autoencoders(cfg, in.base, in.data, ex, seed);
        save_ae_bank(bank, dir / "ae.ckpt");
        write_ae_loss_csv(dir / "ae_loss.csv", bank);
    });
}

namespace {

AngleReport angles_on_disk(const ExperimentConfig& cfg, std::uint64_t seed, AngleMethod method, const Extraction& ex) {
    const auto dir = seed_dir(cfg, seed);
    AEBank bank;
    if (method == AngleMethod::AeTsne) bank = load_ae_bank(require(dir / "ae.ckpt", "train-ae"));
    AngleReport report = compute_angles(cfg, ex, method == AngleMethod::AeTsne ? &bank : nullptr, method, seed);
    write_angles_csv(dir / ("angles_" + method_tag(method) + ".csv"), report);
    write_histogram_csv(dir / ("histogram_" + method_tag(method) + ".csv"), report.histogram);
    return report;
}

}  // namespace

void cmd_angles(const ExperimentConfig& cfg, std::uint64_t seed, AngleMethod method) {
    const auto dir = seed_dir(cfg, seed);
    staged("angles", dir, [&] {
        const AngleReport r = angles_on_disk(cfg, seed, method, load_extraction(dir));
        const ClassCounts c = r.counts();
        spdlog::info("seed {} [{}]: mean angle {:.2f} (std {:.2f}); synergistic {}, orthogonal {}, conflict {}", seed,
                     to_string(method), r.mean_angle(), r.std_angle(), c.synergistic, c.orthogonal, c.conflict);
    });
}

void cmd_edit(const ExperimentConfig& cfg, std::uint64_t seed, Strategy strategy, AngleMethod method) {
    const auto dir = seed_dir(cfg, seed);
    staged("edit", dir, [&] {
        const Loaded in = load_base(dir);
        const Extraction ex = load_extraction(dir);
        EditOutcome out;
        if (uses_plan(strategy)) {
            AngleReport report;
            const double ms = benchmark_edit_time([&] { report = angles_on_disk(cfg, seed, method, ex); });
            out = apply_plan_strategy(cfg, in.base, ex, report, strategy);
            out.wall_time_ms.insert(out.wall_time_ms.begin(), {"angles", ms});
        } else {
            out = run_baseline(cfg, in.base, in.data, ex, strategy, seed);
        }
        save_edit(dir, strategy, out);
    });
}

EvalReport cmd_eval(const ExperimentConfig& cfg, std::uint64_t seed, Strategy strategy,
                    const std::optional<std::filesystem::path>& checkpoint) {
    const auto dir = seed_dir(cfg, seed);
    return staged("eval", dir, [&] {
        const Loaded in = load_base(dir);
        const auto ckpt = checkpoint.value_or(dir / ("edited_" + file_tag(strategy) + ".ckpt"));
        const ModelParams edited = load_model(require(ckpt, "edit"));
        EvalReport r = evaluate(edited, in.base, in.data, strategy, seed, std::nullopt);
        const auto meta_path = dir / ("edit_" + file_tag(strategy) + ".json");
        if (!checkpoint && std::filesystem::exists(meta_path)) {
            std::ifstream meta_in(meta_path);
            const auto meta = nlohmann::ordered_json::parse(meta_in);
            for (const auto& [phase, ms] : meta.at("wall_time_ms").items()) r.wall_time_ms.emplace_back(phase, ms.get<double>());
            if (meta.contains("class_counts")) {
                const auto& c = meta.at("class_counts");
                r.class_counts = ClassCounts{c.at("synergistic").get<int>(), c.at("orthogonal").get<int>(),
                                             c.at("conflict").get<int>()};
            }
        }
        write_json(dir / ("eval_" + file_tag(strategy) + ".json"), r.to_json());
        append_ledger_row(cfg.output_dir / "ledger.csv", r);
        return r;
    });
}

std::vector<EvalReport> cmd_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    const auto ledger = cfg.output_dir / "ledger.csv";
    const auto timings = cfg.output_dir / "timings.csv";
    write_ledger_header(ledger);
    std::filesystem::remove(timings);

    bool any_plan = false;
    for (const auto s : cfg.strategies) any_plan = any_plan || uses_plan(s);

    std::vector<EvalReport> reports;
    for (const std::uint64_t seed : cfg.seeds) {
        const auto dir = seed_dir(cfg, seed);
        std::filesystem::create_directories(dir);
        std::filesystem::remove(dir / "FAILED");

        const FactDataset data = staged("gen-data", dir, [&] {
            FactDataset d = make_dataset(cfg, seed);
            save_jsonl(d, dir / "data.jsonl");
            return d;
        });
        const ModelParams base = staged("pretrain", dir, [&] {
            FinetuneResult pre = pretrain_base(cfg, data, seed);
            save_model(pre.final_params, dir / "base.ckpt");
            write_loss_curve(dir / "pretrain_loss.csv", pre.loss_curve);
            spdlog::info("seed {}: base model answers {:.1f}% of old facts", seed,
                         reliability(pre.final_params, data.d_old()));
            return pre.final_params;
        });
        const Extraction ex = staged("extract", dir, [&] {
            Extraction e = extract_task_vectors(cfg, base, data, seed);
            save_extraction(dir, e);
            return e;
        });

        // The reduction is shared by every plan-based strategy; its time is
        // charged to each of them.
        AngleReport report;
        Timings shared;
        if (any_plan) {
            AEBank bank;
            if (cfg.method == AngleMethod::AeTsne) {
                shared.emplace_back("ae_train", staged("train-ae", dir, [&] {
                                        const double ms = benchmark_edit_time([&] { bank = train_autoencoders(cfg, base, data, ex, seed); });
                                        save_ae_bank(bank, dir / "ae.ckpt");
                                        write_ae_loss_csv(dir / "ae_loss.csv", bank);
                                        return ms;
                                    }));
            }
            shared.emplace_back("angles", staged("angles", dir, [&] {
                                    const double ms = benchmark_edit_time([&] {
                                        report = compute_angles(cfg, ex, cfg.method == AngleMethod::AeTsne ? &bank : nullptr,
                                                                cfg.method, seed);
                                    });
                                    write_angles_csv(dir / ("angles_" + method_tag(cfg.method) + ".csv"), report);
                                    write_histogram_csv(dir / ("histogram_" + method_tag(cfg.method) + ".csv"), report.histogram);
                                    return ms;
                                }));
        }

        for (const Strategy s : cfg.strategies) {
            EditOutcome out = staged("edit", dir, [&] {
                EditOutcome o = uses_plan(s) ? apply_plan_strategy(cfg, base, ex, report, s)
                                             : run_baseline(cfg, base, data, ex, s, seed);
                if (uses_plan(s)) o.wall_time_ms.insert(o.wall_time_ms.begin(), shared.begin(), shared.end());
                save_edit(dir, s, o);
                return o;
            });
            EvalReport r = staged("eval", dir, [&] {
                EvalReport e = evaluate(out.edited, base, data, s, seed, out.plan, out.wall_time_ms);
                write_json(dir / ("eval_" + file_tag(s) + ".json"), e.to_json());
                append_ledger_row(ledger, e);
                append_timing_rows(timings, e);
                return e;
            });
            spdlog::info("seed {} {:>14}: reliability {:6.2f}  generality {:6.2f}  locality {:6.2f}", seed, r.strategy,
                         r.reliability, r.generality, r.locality);
            reports.push_back(std::move(r));
        }
    }
    write_summary_csv(cfg.output_dir / "summary.csv", reports);
    return reports;
}

}  // namespace geoedit
