#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geoedit/toymodel.hpp"

namespace geoedit {

/// One (subject, relation) fact. Edit targets carry a counterfactual
/// new_answer; the rest serve as out-of-scope locality probes.
struct FactRecord {
    Token subject = 0;
    Token relation = 0;
    TokenSeq question;
    Token old_answer = 0;
    std::optional<Token> new_answer;
    std::vector<TokenSeq> rephrases;

    bool is_edit_target() const { return new_answer.has_value(); }

    bool operator==(const FactRecord&) const = default;
};

class FactDataset {
public:
    FactDataset() = default;

    /// Throws InputError if the records break a dataset invariant.
    explicit FactDataset(std::vector<FactRecord> records);

    const std::vector<FactRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    /// Every record's question -> old answer.
    std::vector<Example> d_old() const;
    /// Edit targets' question -> new answer.
    std::vector<Example> d_new() const;
    /// Edit targets' question -> old answer (the knowledge being replaced).
    std::vector<Example> d_old_targets() const;
    /// Edit targets' rephrases -> new answer.
    std::vector<Example> rephrase_new() const;
    /// Non-target questions -> old answer.
    std::vector<Example> locality_set() const;
    /// Every question and rephrase of every record -> old answer.
    std::vector<Example> pretrain_corpus() const;

    std::size_t edit_count() const;

    bool operator==(const FactDataset&) const = default;

private:
    std::vector<FactRecord> records_;
};

/// Vocabulary layout of the synthetic question encoding.
///
/// Token ids are split into an optional padding token (0, present when
/// seq_len > 2), relation surface tokens (n_relations * n_aliases of them;
/// alias a of relation r is `relation_base + a * n_relations + r`) and
/// subject tokens filling the rest of the vocabulary. The record's
/// `relation` field holds the alias-0 token. An encoding variant places the
/// subject and one relation alias at two distinct positions and pads the
/// rest; variant 0 is the canonical question.
struct FactEncoding {
    int vocab_size = 0;
    int seq_len = 0;
    int n_relations = 0;
    int n_aliases = 0;

    bool has_pad() const { return seq_len > 2; }
    Token pad_token() const { return 0; }
    Token relation_base() const { return has_pad() ? 1 : 0; }
    Token subject_base() const { return relation_base() + n_relations * n_aliases; }
    int n_subjects() const { return vocab_size - subject_base(); }
    int variant_count() const { return seq_len * (seq_len - 1) * n_aliases; }

    Token relation_token(int relation, int alias) const;

    /// Variant v of the question for (subject index, relation index).
    TokenSeq encode(int subject, int relation, int variant) const;

    /// (subject token, alias-0 relation token); throws InputError when the
    /// sequence is not a valid encoding.
    std::pair<Token, Token> decode(const TokenSeq& question) const;

    /// Smallest layout hosting n_facts distinct facts with n_rephrases
    /// alternative encodings each. Throws GenerationError if none exists.
    static FactEncoding plan(int n_facts, int n_rephrases, int vocab_size, int seq_len);
};

FactDataset generate_synthetic(int n_facts, int n_edits, int n_rephrases, int vocab_size, int seq_len,
                               std::uint64_t seed);

/// ZsRE-shaped JSON lines. Edit targets carry "alt" (new answer); locality
/// records carry "loc" (= src) and "loc-ans" (= old answer). "answers" holds
/// the old answer.
void save_jsonl(const FactDataset& dataset, const std::filesystem::path& path);
FactDataset load_jsonl(const std::filesystem::path& path);

std::string to_jsonl_line(const FactRecord& record);

}  // namespace geoedit
