#include "fslink/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "fslink/csv.hpp"
#include "fslink/rng.hpp"

namespace fslink {

std::size_t RecordSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (fields[i].name == name) return i;
    throw std::invalid_argument("schema has no field named '" + name + "'");
}

void RecordSchema::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& f : fields) {
        if (f.name.empty()) throw std::invalid_argument("schema field with empty name");
        if (!seen.insert(f.name).second)
            throw std::invalid_argument("duplicate schema field name '" + f.name + "'");
    }
}

GroundTruth::GroundTruth(std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs)
    : pairs_(std::move(pairs)), sorted_(false) {
    finalize();
}

void GroundTruth::add(std::uint32_t a, std::uint32_t b) {
    if (a == b) throw std::invalid_argument("ground-truth pair with repeated id");
    if (a > b) std::swap(a, b);
    pairs_.emplace_back(a, b);
    sorted_ = false;
}

void GroundTruth::finalize() {
    for (auto& p : pairs_) {
        if (p.first == p.second) throw std::invalid_argument("ground-truth pair with repeated id");
        if (p.first > p.second) std::swap(p.first, p.second);
    }
    std::sort(pairs_.begin(), pairs_.end());
    pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
    sorted_ = true;
}

bool GroundTruth::contains(std::uint32_t a, std::uint32_t b) const {
    if (!sorted_) const_cast<GroundTruth*>(this)->finalize();
    if (a > b) std::swap(a, b);
    return std::binary_search(pairs_.begin(), pairs_.end(), std::make_pair(a, b));
}

RecordStore load_csv(const std::string& path, const RecordSchema& schema,
                     const CsvOptions& options) {
    schema.validate();
    auto rows = csv::read_file(path, options.delimiter);
    RecordStore store;
    store.schema = schema;

    std::size_t row_no = 0;
    for (const auto& row : rows) {
        ++row_no;
        if (options.header && row_no == 1) continue;
        if (row.size() == 1 && row[0].empty()) continue;  // blank line
        if (row.size() != schema.size()) {
            throw std::runtime_error("row " + std::to_string(row_no) + ": expected " +
                                     std::to_string(schema.size()) + " fields, got " +
                                     std::to_string(row.size()));
        }
        Record rec;
        rec.reserve(row.size());
        for (const auto& cell : row) {
            if (!options.na_marker.empty() && cell == options.na_marker)
                rec.push_back(std::nullopt);
            else
                rec.push_back(cell);
        }
        store.records.push_back(std::move(rec));
    }
    return store;
}

void write_csv(const std::string& path, const RecordStore& store, const CsvOptions& options) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    std::vector<std::string> row;
    if (options.header) {
        for (const auto& f : store.schema.fields) row.push_back(f.name);
        csv::write_record(out, row, options.delimiter);
    }
    for (const auto& rec : store.records) {
        row.clear();
        for (const auto& v : rec) row.push_back(v ? *v : options.na_marker);
        csv::write_record(out, row, options.delimiter);
    }
}

GroundTruth load_truth_csv(const std::string& path, bool header) {
    auto rows = csv::read_file(path, ',');
    GroundTruth truth;
    std::size_t row_no = 0;
    for (const auto& row : rows) {
        ++row_no;
        if (header && row_no == 1) continue;
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != 2)
            throw std::runtime_error("truth row " + std::to_string(row_no) +
                                     ": expected 2 fields, got " + std::to_string(row.size()));
        truth.add(static_cast<std::uint32_t>(std::stoul(row[0])),
                  static_cast<std::uint32_t>(std::stoul(row[1])));
    }
    truth.finalize();
    return truth;
}

void write_truth_csv(const std::string& path, const GroundTruth& truth) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "id_a,id_b\n";
    for (const auto& [a, b] : truth.pairs()) out << a << ',' << b << '\n';
}

GroundTruth truth_from_identity_csv(const std::string& path, bool header) {
    auto rows = csv::read_file(path, ',');
    std::vector<std::string> ids;
    std::size_t row_no = 0;
    for (const auto& row : rows) {
        ++row_no;
        if (header && row_no == 1) continue;
        if (row.empty() || (row.size() == 1 && row[0].empty())) continue;
        // tolerate an R-style leading row-name column; the entity id is the
        // last field
        ids.push_back(row.back());
    }
    std::unordered_map<std::string, std::vector<std::uint32_t>> groups;
    for (std::uint32_t i = 0; i < ids.size(); ++i) groups[ids[i]].push_back(i);
    GroundTruth truth;
    for (const auto& [_, members] : groups)
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j)
                truth.add(members[i], members[j]);
    truth.finalize();
    return truth;
}

void CorruptionConfig::validate(std::size_t n_fields) const {
    if (duplicate_fraction < 0.0 || duplicate_fraction > 1.0)
        throw std::invalid_argument("duplicate_fraction must lie in [0,1]");
    if (!field_probs.empty() && field_probs.size() != n_fields)
        throw std::invalid_argument("field_probs size must match the schema");
    for (double p : field_probs)
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("corruption probability outside [0,1]");
}

RecordSchema person_schema() {
    return RecordSchema{{{"fname", FieldKind::String},
                         {"lname", FieldKind::String},
                         {"by", FieldKind::Integer},
                         {"bm", FieldKind::Integer},
                         {"bd", FieldKind::Integer}}};
}

namespace {

// Name pools for the synthetic person generator. Drawn with a skewed
// distribution so initials cluster the way real name data does.
const std::array<const char*, 60> kFirstNames = {
    "GERD",     "HANS",    "PETER",   "MICHAEL", "WOLFGANG", "KLAUS",   "JUERGEN", "DIETER",
    "HORST",    "WERNER",  "MANFRED", "UWE",     "GUENTER",  "STEFAN",  "THOMAS",  "ANDREAS",
    "FRANK",    "RALF",    "BERND",   "KARL",    "HEINZ",    "NORBERT", "RAINER",  "MARTIN",
    "CHRISTA",  "URSULA",  "HELGA",   "MONIKA",  "INGRID",   "RENATE",  "SABINE",  "KARIN",
    "ANDREA",   "PETRA",   "GISELA",  "BRIGITTE","CLAUDIA",  "SUSANNE", "BIRGIT",  "GABRIELE",
    "ERIKA",    "MARION",  "MARTINA", "ANGELIKA","HILDEGARD","ELKE",    "BEATE",   "ANJA",
    "CHRISTIAN","MATTHIAS","STEPHANIE","KATRIN", "NICOLE",   "SILKE",   "DIRK",    "VOLKER",
    "HEIKE",    "SONJA",   "ROLAND",  "BETTINA"};

const std::array<const char*, 60> kLastNames = {
    "MUELLER",  "SCHMIDT",   "SCHNEIDER", "FISCHER",  "WEBER",    "MEYER",     "WAGNER",
    "BECKER",   "SCHULZ",    "HOFFMANN",  "SCHAEFER", "KOCH",     "BAUER",     "RICHTER",
    "KLEIN",    "WOLF",      "SCHROEDER", "NEUMANN",  "SCHWARZ",  "ZIMMERMANN","BRAUN",
    "KRUEGER",  "HOFMANN",   "HARTMANN",  "LANGE",    "SCHMITT",  "WERNER",    "SCHMITZ",
    "KRAUSE",   "MEIER",     "LEHMANN",   "SCHMID",   "SCHULZE",  "MAIER",     "KOEHLER",
    "HERRMANN", "KOENIG",    "WALTER",    "MAYER",    "HUBER",    "KAISER",    "FUCHS",
    "PETERS",   "LANG",      "SCHOLZ",    "MOELLER",  "WEISS",    "JUNG",      "HAHN",
    "SCHUBERT", "VOGEL",     "FRIEDRICH", "KELLER",   "GUENTHER", "FRANK",     "BERGER",
    "WINKLER",  "ROTH",      "BECK",      "LORENZ"};

const char kLetters[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

// Zipf-flavored pool index: earlier entries much more likely.
std::size_t skewed_index(Rng& rng, std::size_t pool) {
    double u = rng.uniform();
    double v = u * u;  // quadratic skew toward 0
    auto idx = static_cast<std::size_t>(v * static_cast<double>(pool));
    return idx >= pool ? pool - 1 : idx;
}

std::string corrupt_string(const std::string& s, Rng& rng) {
    if (s.empty()) return s;
    // kinds: substitution, adjacent transposition, deletion; one-char strings
    // only admit substitution
    std::uint64_t kind = s.size() < 2 ? 0 : rng.bounded(3);
    std::string out = s;
    switch (kind) {
        case 1: {  // transposition
            auto pos = static_cast<std::size_t>(rng.bounded(out.size() - 1));
            std::swap(out[pos], out[pos + 1]);
            if (out == s) {  // swapped equal chars; fall back to substitution
                out[pos] = (s[pos] == 'A') ? 'B' : 'A';
            }
            return out;
        }
        case 2: {  // deletion
            out.erase(static_cast<std::size_t>(rng.bounded(out.size())), 1);
            return out;
        }
        default: {  // substitution
            auto pos = static_cast<std::size_t>(rng.bounded(out.size()));
            char repl = kLetters[rng.bounded(26)];
            if (repl == out[pos]) repl = kLetters[(repl - 'A' + 1) % 26];
            out[pos] = repl;
            return out;
        }
    }
}

std::string corrupt_integer(const std::string& s, Rng& rng) {
    if (s.empty()) return s;
    // kinds: digit substitution, adjacent digit swap
    bool swap_ok = s.size() >= 2;
    if (swap_ok && rng.bounded(2) == 1) {
        auto pos = static_cast<std::size_t>(rng.bounded(s.size() - 1));
        std::string out = s;
        std::swap(out[pos], out[pos + 1]);
        if (out != s) return out;
    }
    std::string out = s;
    auto pos = static_cast<std::size_t>(rng.bounded(out.size()));
    char repl = static_cast<char>('0' + rng.bounded(10));
    if (repl == out[pos]) repl = static_cast<char>('0' + (repl - '0' + 1) % 10);
    out[pos] = repl;
    return out;
}

}  // namespace

std::pair<RecordStore, GroundTruth> generate_corpus(std::size_t n_base,
                                                    const CorruptionConfig& config,
                                                    std::uint64_t seed) {
    if (n_base < 1) throw std::invalid_argument("n_base must be >= 1");
    RecordSchema schema = person_schema();
    config.validate(schema.size());
    std::vector<double> probs = config.field_probs;
    if (probs.empty()) probs.assign(schema.size(), 0.0);

    Rng rng(seed);
    RecordStore store;
    store.schema = schema;
    store.records.reserve(n_base);
    for (std::size_t i = 0; i < n_base; ++i) {
        Record rec(5);
        rec[0] = kFirstNames[skewed_index(rng, kFirstNames.size())];
        rec[1] = kLastNames[skewed_index(rng, kLastNames.size())];
        rec[2] = std::to_string(1900 + rng.bounded(100));
        rec[3] = std::to_string(1 + rng.bounded(12));
        rec[4] = std::to_string(1 + rng.bounded(28));
        store.records.push_back(std::move(rec));
    }

    auto n_dup = static_cast<std::size_t>(config.duplicate_fraction * static_cast<double>(n_base) + 0.5);
    if (n_dup > n_base) n_dup = n_base;

    // sample n_dup distinct source ids (partial Fisher-Yates)
    std::vector<std::uint32_t> ids(n_base);
    for (std::uint32_t i = 0; i < n_base; ++i) ids[i] = i;
    for (std::size_t i = 0; i < n_dup; ++i) {
        auto j = i + static_cast<std::size_t>(rng.bounded(n_base - i));
        std::swap(ids[i], ids[j]);
    }

    GroundTruth truth;
    for (std::size_t k = 0; k < n_dup; ++k) {
        std::uint32_t src = ids[k];
        Record dup = store.records[src];
        for (std::size_t f = 0; f < schema.size(); ++f) {
            if (!dup[f]) continue;
            if (rng.uniform() < probs[f]) {
                dup[f] = schema.fields[f].kind == FieldKind::Integer
                             ? corrupt_integer(*dup[f], rng)
                             : corrupt_string(*dup[f], rng);
            }
        }
        store.records.push_back(std::move(dup));
        truth.add(src, static_cast<std::uint32_t>(n_base + k));
    }
    truth.finalize();
    return {std::move(store), std::move(truth)};
}

}  // namespace fslink
