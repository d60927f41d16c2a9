#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "clicotea/common.hpp"
#include "clicotea/corpus.hpp"
#include "clicotea/tokenizer.hpp"

namespace clicotea::config {

// ---------------------------------------------------------------------------
// Minimal TOML-style reader: [section] headers, key = value lines, # comments.
// Values: quoted strings, integers, floats, booleans, flat arrays of scalars.
// Keys are flattened to "section.key".
// ---------------------------------------------------------------------------

struct TomlValue {
    enum class Kind { string, integer, floating, boolean, array };
    Kind kind = Kind::string;
    std::string str;
    std::int64_t integer = 0;
    double floating = 0.0;
    bool boolean = false;
    std::vector<TomlValue> array;
};

using TomlTable = std::map<std::string, TomlValue>;

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

/// Cuts a trailing comment, respecting double-quoted strings.
inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

inline bool looks_like_integer(const std::string& s) {
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

inline std::string parse_quoted(const std::string& s) {
    if (s.size() < 2 || s.back() != '"') throw std::runtime_error("unterminated string: " + s);
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        if (s[i] == '\\') {
            ++i;
            if (i + 1 >= s.size() + 1 || (s[i] != '"' && s[i] != '\\'))
                throw std::runtime_error("unsupported escape in string: " + s);
            out += s[i];
        } else if (s[i] == '"') {
            throw std::runtime_error("unexpected quote inside string: " + s);
        } else {
            out += s[i];
        }
    }
    return out;
}

/// Splits the inside of an array literal on top-level commas.
inline std::vector<std::string> split_array_items(const std::string& inner) {
    std::vector<std::string> items;
    std::string cur;
    bool in_string = false;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        const char c = inner[i];
        if (in_string) {
            cur += c;
            if (c == '\\' && i + 1 < inner.size()) cur += inner[++i];
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            cur += c;
            in_string = true;
        } else if (c == ',') {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    const std::string last = trim(cur);
    if (!last.empty()) items.push_back(last);
    return items;
}

}  // namespace detail

inline TomlValue parse_toml_value(const std::string& raw) {
    const std::string s = detail::trim(raw);
    if (s.empty()) throw std::runtime_error("empty value");
    TomlValue v;
    if (s.front() == '"') {
        v.kind = TomlValue::Kind::string;
        v.str = detail::parse_quoted(s);
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']') throw std::runtime_error("unterminated array: " + s);
        v.kind = TomlValue::Kind::array;
        for (const auto& item : detail::split_array_items(s.substr(1, s.size() - 2)))
            v.array.push_back(parse_toml_value(item));
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.boolean = (s == "true");
        return v;
    }
    if (detail::looks_like_integer(s)) {
        v.kind = TomlValue::Kind::integer;
        v.integer = std::stoll(s);
        return v;
    }
    try {
        std::size_t consumed = 0;
        const double d = std::stod(s, &consumed);
        if (consumed == s.size()) {
            v.kind = TomlValue::Kind::floating;
            v.floating = d;
            return v;
        }
    } catch (const std::exception&) {
    }
    throw std::runtime_error("invalid value: " + s);
}

inline TomlTable parse_toml(const std::string& text, const std::string& origin = "config") {
    TomlTable table;
    std::string section;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = (eol == std::string::npos) ? text.size() + 1 : eol + 1;
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        line = detail::trim(detail::strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::runtime_error(where + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw std::runtime_error(where + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error(where + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw std::runtime_error(where + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (table.count(full)) throw std::runtime_error(where + ": duplicate key " + full);
        try {
            table[full] = parse_toml_value(line.substr(eq + 1));
        } catch (const std::exception& e) {
            throw std::runtime_error(where + ": " + e.what());
        }
    }
    return table;
}

/// Applies a `--set section.field=value` override. Values that fail scalar
/// parsing are taken as bare strings, so quoting is optional on the CLI.
inline void apply_override(TomlTable& table, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::runtime_error("override must look like section.field=value: " + assignment);
    const std::string key = detail::trim(assignment.substr(0, eq));
    const std::string raw = detail::trim(assignment.substr(eq + 1));
    try {
        table[key] = parse_toml_value(raw);
    } catch (const std::exception&) {
        TomlValue v;
        v.kind = TomlValue::Kind::string;
        v.str = raw;
        table[key] = v;
    }
}

// ---------------------------------------------------------------------------
// Typed pipeline configuration
// ---------------------------------------------------------------------------

struct Diagnostic {
    std::string section;
    std::string field;
    std::string message;

    std::string format() const {
        return (section.empty() ? field : section + "." + field) + ": " + message;
    }
};

struct CorpusSection {
    std::string external_path;  // when set, load this corpus instead of generating
    int num_stems = 120;
    int markers_per_class = 2;
    double loanword_fraction = 1.0;
    int train_pairs = 20000;
    int validation_pairs = 500;
    int test_pairs = 500;
    int min_words = 5;
    int max_words = 9;
    int permutation_window = 2;
    // Translation noise defaults to zero: every noisy word makes its whole
    // sentence an ambiguous training target for alignment (the student cannot
    // recover what the teacher read), so noise is opt-in rather than ambient.
    double drop_prob = 0.0;
    double duplicate_prob = 0.0;
    double substitution_prob = 0.0;
};

struct EncoderSection {
    int num_layers = 2;
    int num_heads = 4;
    int hidden_dim = 64;
    int ff_dim = 128;
    int max_len = 32;
    int vocab_target_size = 512;
    double mlm_mask_rate = 0.15;
    int mlm_steps = 500;
    double mlm_lr = 1e-3;
    int mlm_batch_size = 32;
};

/// The student ships with one more layer than the teacher. Its lower layers
/// start from the teacher's initialisation; the extra layer gives alignment
/// training capacity the teacher never saw.
inline EncoderSection default_student_encoder() {
    EncoderSection s;
    s.num_layers = 3;
    return s;
}

struct AlignmentSection {
    double tau = 0.001;
    std::string pooling = "leftmost";
    int extraction_layers = 1;  // student-init layers kept by the alignment extractor
    int encoder_layers = 3;     // student layers kept for training, evaluation, and the swap
    bool use_gold = false;
    bool filter_bypass = false;  // explicit per-language bypass of the link filter
    double retention_min_fraction = 0.03;
    int max_pairs = 20000;
};

struct TrainingSection {
    double lr = 5e-5;
    int batch_size = 128;
    int epochs = 3;
    bool augment_with_source = true;
    double augment_ratio = 1.0;
};

struct EvalSection {
    std::vector<int> recall_ks{1, 5, 10};
    std::vector<std::string> tasks{"retrieval", "classification"};
    int classification_train = 2000;
};

struct PipelineConfig {
    std::string output_dir = "out";
    std::uint64_t seed = 42;
    CorpusSection corpus;
    EncoderSection teacher;
    EncoderSection student = default_student_encoder();
    AlignmentSection alignment;
    TrainingSection training;
    EvalSection eval;
};

namespace detail {

class Loader {
public:
    Loader(const TomlTable& table, std::vector<Diagnostic>& diags) : table_(table), diags_(diags) {}

    long long get_int(const std::string& key, long long fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::integer) {
            complain(key, "expected an integer");
            return fallback;
        }
        return v->integer;
    }

    double get_double(const std::string& key, double fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (v->kind == TomlValue::Kind::floating) return v->floating;
        if (v->kind == TomlValue::Kind::integer) return static_cast<double>(v->integer);
        complain(key, "expected a number");
        return fallback;
    }

    bool get_bool(const std::string& key, bool fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::boolean) {
            complain(key, "expected true or false");
            return fallback;
        }
        return v->boolean;
    }

    std::string get_string(const std::string& key, const std::string& fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::string) {
            complain(key, "expected a string");
            return fallback;
        }
        return v->str;
    }

    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::array) {
            complain(key, "expected an array of integers");
            return fallback;
        }
        std::vector<int> out;
        for (const auto& item : v->array) {
            if (item.kind != TomlValue::Kind::integer) {
                complain(key, "expected an array of integers");
                return fallback;
            }
            out.push_back(static_cast<int>(item.integer));
        }
        return out;
    }

    std::vector<std::string> get_string_list(const std::string& key, std::vector<std::string> fallback) {
        const TomlValue* v = fetch(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::array) {
            complain(key, "expected an array of strings");
            return fallback;
        }
        std::vector<std::string> out;
        for (const auto& item : v->array) {
            if (item.kind != TomlValue::Kind::string) {
                complain(key, "expected an array of strings");
                return fallback;
            }
            out.push_back(item.str);
        }
        return out;
    }

    void finish() {
        for (const auto& [key, value] : table_) {
            (void)value;
            if (!used_.count(key)) complain(key, "unknown key");
        }
    }

private:
    const TomlValue* fetch(const std::string& key) {
        used_.insert(key);
        const auto it = table_.find(key);
        return it == table_.end() ? nullptr : &it->second;
    }

    void complain(const std::string& key, const std::string& message) {
        const std::size_t dot = key.rfind('.');
        Diagnostic d;
        if (dot == std::string::npos) {
            d.field = key;
        } else {
            d.section = key.substr(0, dot);
            d.field = key.substr(dot + 1);
        }
        d.message = message;
        diags_.push_back(std::move(d));
    }

    const TomlTable& table_;
    std::vector<Diagnostic>& diags_;
    std::set<std::string> used_;
};

inline void load_encoder_section(Loader& loader, const std::string& prefix, EncoderSection& enc) {
    enc.num_layers = static_cast<int>(loader.get_int(prefix + ".num_layers", enc.num_layers));
    enc.num_heads = static_cast<int>(loader.get_int(prefix + ".num_heads", enc.num_heads));
    enc.hidden_dim = static_cast<int>(loader.get_int(prefix + ".hidden_dim", enc.hidden_dim));
    enc.ff_dim = static_cast<int>(loader.get_int(prefix + ".ff_dim", enc.ff_dim));
    enc.max_len = static_cast<int>(loader.get_int(prefix + ".max_len", enc.max_len));
    enc.vocab_target_size = static_cast<int>(loader.get_int(prefix + ".vocab_target_size", enc.vocab_target_size));
    enc.mlm_mask_rate = loader.get_double(prefix + ".mlm_mask_rate", enc.mlm_mask_rate);
    enc.mlm_steps = static_cast<int>(loader.get_int(prefix + ".mlm_steps", enc.mlm_steps));
    enc.mlm_lr = loader.get_double(prefix + ".mlm_lr", enc.mlm_lr);
    enc.mlm_batch_size = static_cast<int>(loader.get_int(prefix + ".mlm_batch_size", enc.mlm_batch_size));
}

}  // namespace detail

/// Builds the typed config from a parsed table. Type errors and unknown keys
/// become diagnostics; fields keep their defaults when a value is unusable.
inline PipelineConfig config_from_table(const TomlTable& table, std::vector<Diagnostic>& diags) {
    PipelineConfig cfg;
    detail::Loader loader(table, diags);

    cfg.output_dir = loader.get_string("output_dir", cfg.output_dir);
    const long long seed = loader.get_int("seed", static_cast<long long>(cfg.seed));
    if (seed < 0)
        diags.push_back({"", "seed", "must be non-negative"});
    else
        cfg.seed = static_cast<std::uint64_t>(seed);

    auto& c = cfg.corpus;
    c.external_path = loader.get_string("corpus.external_path", c.external_path);
    c.num_stems = static_cast<int>(loader.get_int("corpus.num_stems", c.num_stems));
    c.markers_per_class = static_cast<int>(loader.get_int("corpus.markers_per_class", c.markers_per_class));
    c.loanword_fraction = loader.get_double("corpus.loanword_fraction", c.loanword_fraction);
    c.train_pairs = static_cast<int>(loader.get_int("corpus.train_pairs", c.train_pairs));
    c.validation_pairs = static_cast<int>(loader.get_int("corpus.validation_pairs", c.validation_pairs));
    c.test_pairs = static_cast<int>(loader.get_int("corpus.test_pairs", c.test_pairs));
    c.min_words = static_cast<int>(loader.get_int("corpus.min_words", c.min_words));
    c.max_words = static_cast<int>(loader.get_int("corpus.max_words", c.max_words));
    c.permutation_window = static_cast<int>(loader.get_int("corpus.permutation_window", c.permutation_window));
    c.drop_prob = loader.get_double("corpus.drop_prob", c.drop_prob);
    c.duplicate_prob = loader.get_double("corpus.duplicate_prob", c.duplicate_prob);
    c.substitution_prob = loader.get_double("corpus.substitution_prob", c.substitution_prob);

    detail::load_encoder_section(loader, "teacher", cfg.teacher);
    detail::load_encoder_section(loader, "student", cfg.student);

    auto& a = cfg.alignment;
    a.tau = loader.get_double("alignment.tau", a.tau);
    a.pooling = loader.get_string("alignment.pooling", a.pooling);
    a.extraction_layers = static_cast<int>(loader.get_int("alignment.extraction_layers", a.extraction_layers));
    // Unset means the full student: the trained student keeps every layer.
    a.encoder_layers = static_cast<int>(loader.get_int("alignment.encoder_layers", cfg.student.num_layers));
    a.use_gold = loader.get_bool("alignment.use_gold", a.use_gold);
    a.filter_bypass = loader.get_bool("alignment.filter_bypass", a.filter_bypass);
    a.retention_min_fraction = loader.get_double("alignment.retention_min_fraction", a.retention_min_fraction);
    a.max_pairs = static_cast<int>(loader.get_int("alignment.max_pairs", a.max_pairs));

    auto& t = cfg.training;
    t.lr = loader.get_double("training.lr", t.lr);
    t.batch_size = static_cast<int>(loader.get_int("training.batch_size", t.batch_size));
    t.epochs = static_cast<int>(loader.get_int("training.epochs", t.epochs));
    t.augment_with_source = loader.get_bool("training.augment_with_source", t.augment_with_source);
    t.augment_ratio = loader.get_double("training.augment_ratio", t.augment_ratio);

    auto& e = cfg.eval;
    e.recall_ks = loader.get_int_list("eval.recall_ks", e.recall_ks);
    e.tasks = loader.get_string_list("eval.tasks", e.tasks);
    e.classification_train = static_cast<int>(loader.get_int("eval.classification_train", e.classification_train));

    loader.finish();
    return cfg;
}

inline std::vector<Diagnostic> validate_config(const PipelineConfig& cfg) {
    std::vector<Diagnostic> diags;
    auto bad = [&diags](const std::string& section, const std::string& field, const std::string& message) {
        diags.push_back({section, field, message});
    };

    if (cfg.output_dir.empty()) bad("", "output_dir", "must be non-empty");

    const auto& c = cfg.corpus;
    if (c.external_path.empty()) {
        if (c.train_pairs < 1) bad("corpus", "train_pairs", "must be >= 1");
        if (c.validation_pairs < 0) bad("corpus", "validation_pairs", "must be >= 0");
        if (c.test_pairs < 1) bad("corpus", "test_pairs", "must be >= 1");
        if (c.min_words < 2) bad("corpus", "min_words", "must be >= 2");
        if (c.max_words < c.min_words) bad("corpus", "max_words", "must be >= min_words");
        if (c.num_stems < 2 * c.max_words + 2) bad("corpus", "num_stems", "must be >= 2*max_words + 2");
        if (c.num_stems % 2 != 0) bad("corpus", "num_stems", "must be even (stems pair into couples)");
        if (c.markers_per_class < 1) bad("corpus", "markers_per_class", "must be >= 1");
        if (c.loanword_fraction < 0.0 || c.loanword_fraction > 1.0)
            bad("corpus", "loanword_fraction", "must be in [0, 1]");
        if (c.permutation_window < 0) bad("corpus", "permutation_window", "must be >= 0");
        for (const auto& [name, p] : {std::pair<const char*, double>{"drop_prob", c.drop_prob},
                                      {"duplicate_prob", c.duplicate_prob},
                                      {"substitution_prob", c.substitution_prob}})
            if (p < 0.0 || p >= 1.0) bad("corpus", name, "must be in [0, 1)");
    }

    auto check_encoder = [&bad](const std::string& section, const EncoderSection& enc) {
        if (enc.num_layers < 1) bad(section, "num_layers", "must be >= 1");
        if (enc.num_heads < 1) bad(section, "num_heads", "must be >= 1");
        if (enc.hidden_dim < 1) bad(section, "hidden_dim", "must be >= 1");
        if (enc.num_heads >= 1 && enc.hidden_dim >= 1 && enc.hidden_dim % enc.num_heads != 0)
            bad(section, "hidden_dim", "must be divisible by num_heads");
        if (enc.ff_dim < 1) bad(section, "ff_dim", "must be >= 1");
        if (enc.max_len < 2) bad(section, "max_len", "must be >= 2");
        if (enc.vocab_target_size < tokenizer::SpecialIds::count + 1)
            bad(section, "vocab_target_size", "too small for the special tokens");
        if (enc.mlm_mask_rate <= 0.0 || enc.mlm_mask_rate > 1.0) bad(section, "mlm_mask_rate", "must be in (0, 1]");
        if (enc.mlm_steps < 0) bad(section, "mlm_steps", "must be >= 0");
        if (enc.mlm_lr <= 0.0) bad(section, "mlm_lr", "must be positive");
        if (enc.mlm_batch_size < 1) bad(section, "mlm_batch_size", "must be >= 1");
    };
    check_encoder("teacher", cfg.teacher);
    check_encoder("student", cfg.student);
    if (cfg.teacher.hidden_dim != cfg.student.hidden_dim)
        bad("student", "hidden_dim", "must equal teacher.hidden_dim for alignment and the encoder swap");

    const auto& a = cfg.alignment;
    if (a.tau <= 0.0 || a.tau >= 1.0) bad("alignment", "tau", "must be in (0, 1)");
    if (a.pooling != "leftmost" && a.pooling != "mean") bad("alignment", "pooling", "must be leftmost or mean");
    if (a.extraction_layers < 1 || a.extraction_layers > cfg.student.num_layers)
        bad("alignment", "extraction_layers", "must be in [1, student.num_layers]");
    if (a.encoder_layers < 1 || a.encoder_layers > cfg.student.num_layers)
        bad("alignment", "encoder_layers", "must be in [1, student.num_layers]");
    if (a.retention_min_fraction < 0.0 || a.retention_min_fraction > 1.0)
        bad("alignment", "retention_min_fraction", "must be in [0, 1]");
    if (a.max_pairs < 1) bad("alignment", "max_pairs", "must be >= 1");

    const auto& t = cfg.training;
    if (t.lr <= 0.0) bad("training", "lr", "must be positive");
    if (t.batch_size < 1) bad("training", "batch_size", "must be >= 1");
    if (t.epochs < 0) bad("training", "epochs", "must be >= 0");
    if (t.augment_ratio < 0.0 || t.augment_ratio > 1.0) bad("training", "augment_ratio", "must be in [0, 1]");

    const auto& e = cfg.eval;
    if (e.recall_ks.empty()) bad("eval", "recall_ks", "must list at least one k");
    for (const int k : e.recall_ks)
        if (k < 1) bad("eval", "recall_ks", "every k must be >= 1");
    for (const auto& task : e.tasks)
        if (task != "retrieval" && task != "classification")
            bad("eval", "tasks", "unknown task: " + task);
    if (e.classification_train < corpus::kNumClasses)
        bad("eval", "classification_train", "must cover every class at least once");

    return diags;
}

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
    nlohmann::json j;
    j["output_dir"] = cfg.output_dir;
    j["seed"] = cfg.seed;
    const auto& c = cfg.corpus;
    j["corpus"] = {{"external_path", c.external_path},
                   {"num_stems", c.num_stems},
                   {"markers_per_class", c.markers_per_class},
                   {"loanword_fraction", c.loanword_fraction},
                   {"train_pairs", c.train_pairs},
                   {"validation_pairs", c.validation_pairs},
                   {"test_pairs", c.test_pairs},
                   {"min_words", c.min_words},
                   {"max_words", c.max_words},
                   {"permutation_window", c.permutation_window},
                   {"drop_prob", c.drop_prob},
                   {"duplicate_prob", c.duplicate_prob},
                   {"substitution_prob", c.substitution_prob}};
    auto enc_json = [](const EncoderSection& e) {
        return nlohmann::json{{"num_layers", e.num_layers},     {"num_heads", e.num_heads},
                              {"hidden_dim", e.hidden_dim},     {"ff_dim", e.ff_dim},
                              {"max_len", e.max_len},           {"vocab_target_size", e.vocab_target_size},
                              {"mlm_mask_rate", e.mlm_mask_rate}, {"mlm_steps", e.mlm_steps},
                              {"mlm_lr", e.mlm_lr},             {"mlm_batch_size", e.mlm_batch_size}};
    };
    j["teacher"] = enc_json(cfg.teacher);
    j["student"] = enc_json(cfg.student);
    const auto& a = cfg.alignment;
    j["alignment"] = {{"tau", a.tau},
                      {"pooling", a.pooling},
                      {"extraction_layers", a.extraction_layers},
                      {"encoder_layers", a.encoder_layers},
                      {"use_gold", a.use_gold},
                      {"filter_bypass", a.filter_bypass},
                      {"retention_min_fraction", a.retention_min_fraction},
                      {"max_pairs", a.max_pairs}};
    const auto& t = cfg.training;
    j["training"] = {{"lr", t.lr},
                     {"batch_size", t.batch_size},
                     {"epochs", t.epochs},
                     {"augment_with_source", t.augment_with_source},
                     {"augment_ratio", t.augment_ratio}};
    const auto& e = cfg.eval;
    j["eval"] = {{"recall_ks", e.recall_ks}, {"tasks", e.tasks}, {"classification_train", e.classification_train}};
    return j;
}

/// Parses a config file plus overrides into a validated PipelineConfig.
/// Diagnostics (type errors, unknown keys, invariant violations) are appended;
/// the config is usable only when the list stays empty.
inline PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                                  std::vector<Diagnostic>& diags) {
    TomlTable table = parse_toml(read_text_file(path), path.filename().string());
    for (const auto& assignment : overrides) apply_override(table, assignment);
    PipelineConfig cfg = config_from_table(table, diags);
    const auto semantic = validate_config(cfg);
    diags.insert(diags.end(), semantic.begin(), semantic.end());
    return cfg;
}

}  // namespace clicotea::config
