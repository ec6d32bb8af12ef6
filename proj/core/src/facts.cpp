#include "geoedit/facts.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "geoedit/error.hpp"
#include "geoedit/random.hpp"

namespace geoedit {

namespace {

using Json = nlohmann::ordered_json;

std::string describe(const FactRecord& r) {
    return "fact (" + std::to_string(r.subject) + ", " + std::to_string(r.relation) + ")";
}

// Invariant checks shared by the constructor and the loader. Returns an
// empty string when the record is fine.
std::string record_problem(const FactRecord& r) {
    if (r.question.empty()) return describe(r) + " has an empty question";
    if (r.new_answer && *r.new_answer == r.old_answer) return describe(r) + " has new answer equal to old answer";
    std::set<TokenSeq> seen{r.question};
    for (const auto& q : r.rephrases) {
        if (q.size() != r.question.size()) return describe(r) + " has a rephrase of different length";
        if (std::find(q.begin(), q.end(), r.subject) == q.end()) {
            return describe(r) + " has a rephrase without its subject token";
        }
        if (!seen.insert(q).second) return describe(r) + " has a rephrase identical to another encoding";
    }
    return {};
}

}  // namespace

FactDataset::FactDataset(std::vector<FactRecord> records) : records_(std::move(records)) {
    std::set<std::pair<Token, Token>> keys;
    for (const auto& r : records_) {
        if (auto problem = record_problem(r); !problem.empty()) throw InputError(problem);
        if (!keys.insert({r.subject, r.relation}).second) throw InputError("duplicate " + describe(r));
        if (r.question.size() != records_.front().question.size()) {
            throw InputError(describe(r) + " question length differs from the rest of the dataset");
        }
    }
}

std::vector<Example> FactDataset::d_old() const {
    std::vector<Example> out;
    for (const auto& r : records_) out.push_back({r.question, r.old_answer});
    return out;
}

std::vector<Example> FactDataset::d_new() const {
    std::vector<Example> out;
    for (const auto& r : records_) {
        if (r.new_answer) out.push_back({r.question, *r.new_answer});
    }
    return out;
}

std::vector<Example> FactDataset::d_old_targets() const {
    std::vector<Example> out;
    for (const auto& r : records_) {
        if (r.new_answer) out.push_back({r.question, r.old_answer});
    }
    return out;
}

std::vector<Example> FactDataset::rephrase_new() const {
    std::vector<Example> out;
    for (const auto& r : records_) {
        if (!r.new_answer) continue;
        for (const auto& q : r.rephrases) out.push_back({q, *r.new_answer});
    }
    return out;
}

std::vector<Example> FactDataset::locality_set() const {
    std::vector<Example> out;
    for (const auto& r : records_) {
        if (!r.new_answer) out.push_back({r.question, r.old_answer});
    }
    return out;
}

std::vector<Example> FactDataset::pretrain_corpus() const {
    std::vector<Example> out;
    for (const auto& r : records_) {
        out.push_back({r.question, r.old_answer});
        for (const auto& q : r.rephrases) out.push_back({q, r.old_answer});
    }
    return out;
}

std::size_t FactDataset::edit_count() const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const FactRecord& r) { return r.is_edit_target(); }));
}

// --- encoding --------------------------------------------------------------

Token FactEncoding::relation_token(int relation, int alias) const {
    return relation_base() + alias * n_relations + relation;
}

TokenSeq FactEncoding::encode(int subject, int relation, int variant) const {
    if (variant < 0 || variant >= variant_count()) throw InputError("encoding variant out of range");
    if (subject < 0 || subject >= n_subjects()) throw InputError("encoding subject out of range");
    if (relation < 0 || relation >= n_relations) throw InputError("encoding relation out of range");
    const int placement = variant / n_aliases;
    const int alias = variant % n_aliases;
    // Placement p enumerates ordered position pairs (i, j), i != j, with the
    // canonical (0, 1) first and its mirror (1, 0) second.
    int subject_pos = 0;
    int relation_pos = 1;
    int index = 0;
    bool found = false;
    for (int gap = 1; gap < seq_len && !found; ++gap) {
        for (int i = 0; i + gap < seq_len && !found; ++i) {
            for (const bool mirrored : {false, true}) {
                if (index == placement) {
                    subject_pos = mirrored ? i + gap : i;
                    relation_pos = mirrored ? i : i + gap;
                    found = true;
                    break;
                }
                ++index;
            }
        }
    }
    TokenSeq q(seq_len, pad_token());
    q[subject_pos] = subject_base() + subject;
    q[relation_pos] = relation_token(relation, alias);
    return q;
}

std::pair<Token, Token> FactEncoding::decode(const TokenSeq& question) const {
    if (static_cast<int>(question.size()) != seq_len) throw InputError("question length mismatch");
    Token subject = -1;
    Token relation = -1;
    for (const Token t : question) {
        if (has_pad() && t == pad_token()) continue;
        if (t >= subject_base() && t < vocab_size) {
            if (subject >= 0) throw InputError("question holds two subject tokens");
            subject = t;
        } else if (t >= relation_base() && t < subject_base()) {
            if (relation >= 0) throw InputError("question holds two relation tokens");
            relation = relation_base() + (t - relation_base()) % n_relations;
        } else {
            throw InputError("token " + std::to_string(t) + " is not part of the encoding");
        }
    }
    if (subject < 0 || relation < 0) throw InputError("question is missing its subject or relation");
    return {subject, relation};
}

FactEncoding FactEncoding::plan(int n_facts, int n_rephrases, int vocab_size, int seq_len) {
    if (seq_len < 2) throw GenerationError("seq_len must be >= 2 to hold a subject and a relation");
    if (n_rephrases < 0) throw GenerationError("n_rephrases must be non-negative");
    const int placements = seq_len * (seq_len - 1);
    FactEncoding enc{vocab_size, seq_len, 0, std::max(1, (n_rephrases + placements) / placements)};
    for (int r = 1;; ++r) {
        enc.n_relations = r;
        const int subjects = enc.n_subjects();
        if (subjects <= 0) break;
        if (static_cast<long>(subjects) * r >= n_facts) return enc;
    }
    throw GenerationError("vocabulary of " + std::to_string(vocab_size) + " tokens cannot host " +
                          std::to_string(n_facts) + " distinct facts with " + std::to_string(n_rephrases) +
                          " rephrases each");
}

FactDataset generate_synthetic(int n_facts, int n_edits, int n_rephrases, int vocab_size, int seq_len,
                               std::uint64_t seed) {
    if (n_facts < 1) throw GenerationError("n_facts must be positive");
    if (n_edits < 0 || n_edits > n_facts) throw GenerationError("n_edits must lie in [0, n_facts]");
    if (vocab_size < 4) throw GenerationError("vocab_size must be >= 4");
    const FactEncoding enc = FactEncoding::plan(n_facts, n_rephrases, vocab_size, seq_len);

    Rng rng(seed);

    // Per relation, half of the vocabulary can be an old answer and the other
    // half a new one, so a new answer never coincides with an old answer of
    // the same relation.
    std::vector<std::vector<Token>> old_pool(enc.n_relations);
    std::vector<std::vector<Token>> new_pool(enc.n_relations);
    for (int r = 0; r < enc.n_relations; ++r) {
        std::vector<Token> tokens(vocab_size);
        for (int t = 0; t < vocab_size; ++t) tokens[t] = t;
        rng.shuffle(std::span<Token>(tokens));
        const auto half = tokens.begin() + vocab_size / 2;
        old_pool[r].assign(tokens.begin(), half);
        new_pool[r].assign(half, tokens.end());
    }

    std::vector<std::pair<int, int>> pairs;
    for (int s = 0; s < enc.n_subjects(); ++s) {
        for (int r = 0; r < enc.n_relations; ++r) pairs.emplace_back(s, r);
    }
    rng.shuffle(std::span<std::pair<int, int>>(pairs));
    pairs.resize(n_facts);

    std::vector<std::size_t> order(n_facts);
    for (int i = 0; i < n_facts; ++i) order[i] = static_cast<std::size_t>(i);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<bool> is_target(n_facts, false);
    for (int i = 0; i < n_edits; ++i) is_target[order[i]] = true;

    std::vector<FactRecord> records;
    records.reserve(n_facts);
    for (int i = 0; i < n_facts; ++i) {
        const auto [s, r] = pairs[i];
        FactRecord rec;
        rec.subject = enc.subject_base() + s;
        rec.relation = enc.relation_token(r, 0);
        rec.question = enc.encode(s, r, 0);
        rec.old_answer = old_pool[r][rng.below(old_pool[r].size())];
        if (is_target[i]) rec.new_answer = new_pool[r][rng.below(new_pool[r].size())];
        for (int v = 1; v <= n_rephrases; ++v) rec.rephrases.push_back(enc.encode(s, r, v));
        for (const auto& q : rec.rephrases) {
            if (enc.decode(q) != std::pair<Token, Token>{rec.subject, rec.relation}) {
                throw GenerationError("rephrase does not decode to its own fact");
            }
        }
        records.push_back(std::move(rec));
    }
    return FactDataset(std::move(records));
}

// --- JSON lines --------------------------------------------------------------

std::string to_jsonl_line(const FactRecord& r) {
    Json j;
    j["subject"] = r.subject;
    j["relation"] = r.relation;
    j["src"] = r.question;
    j["rephrase"] = r.rephrases;
    j["answers"] = Json::array({r.old_answer});
    if (r.new_answer) {
        j["alt"] = *r.new_answer;
    } else {
        j["loc"] = r.question;
        j["loc-ans"] = r.old_answer;
    }
    return j.dump();
}

void save_jsonl(const FactDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& r : dataset.records()) out << to_jsonl_line(r) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

namespace {

template <typename T>
T required(const Json& j, const char* key, std::size_t line) {
    if (!j.contains(key)) throw SchemaError(std::string("missing required field \"") + key + "\"", line);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError(std::string("field \"") + key + "\" has the wrong type", line);
    }
}

FactRecord parse_record(const Json& j, std::size_t line) {
    if (!j.is_object()) throw SchemaError("record is not a JSON object", line);
    FactRecord r;
    r.subject = required<Token>(j, "subject", line);
    r.relation = required<Token>(j, "relation", line);
    r.question = required<TokenSeq>(j, "src", line);
    r.rephrases = required<std::vector<TokenSeq>>(j, "rephrase", line);
    const auto answers = required<std::vector<Token>>(j, "answers", line);
    if (answers.empty()) throw SchemaError("field \"answers\" is empty", line);
    r.old_answer = answers.front();

    const bool has_alt = j.contains("alt");
    const bool has_loc = j.contains("loc") || j.contains("loc-ans");
    if (has_alt && has_loc) throw SchemaError("\"alt\" present on a locality record (not an edit target)", line);
    if (!has_alt && !has_loc) throw SchemaError("record has neither \"alt\" nor \"loc\"", line);
    if (has_alt) {
        r.new_answer = required<Token>(j, "alt", line);
    } else {
        const auto loc = required<TokenSeq>(j, "loc", line);
        const auto loc_ans = required<Token>(j, "loc-ans", line);
        if (loc != r.question || loc_ans != r.old_answer) {
            throw SchemaError("\"loc\"/\"loc-ans\" must repeat \"src\" and the old answer", line);
        }
    }
    if (auto problem = record_problem(r); !problem.empty()) throw SchemaError(problem, line);
    return r;
}

}  // namespace

FactDataset load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<FactRecord> records;
    std::map<std::pair<Token, Token>, std::size_t> seen;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(e.what(), line);
        }
        FactRecord r = parse_record(j, line);
        if (!records.empty() && r.question.size() != records.front().question.size()) {
            throw SchemaError("question length differs from earlier records", line);
        }
        if (!seen.emplace(std::pair{r.subject, r.relation}, line).second) {
            throw SchemaError("duplicate (subject, relation) pair", line);
        }
        records.push_back(std::move(r));
    }
    return FactDataset(std::move(records));
}

}  // namespace geoedit
