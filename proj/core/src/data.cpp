#include "xamr/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "xamr/linearize.hpp"
#include "xamr/random.hpp"

namespace xamr {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool blank(const std::string& s) { return trim(s).empty(); }

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

// "# ::snt Hello there ::id 3" -> {snt: "Hello there", id: "3"}
void parse_metadata(const std::string& line, std::map<std::string, std::string>& into) {
  std::size_t pos = line.find("::");
  while (pos != std::string::npos) {
    const std::size_t next = line.find(" ::", pos + 2);
    const std::string field =
        line.substr(pos + 2, next == std::string::npos ? std::string::npos : next - pos - 2);
    const std::size_t space = field.find_first_of(" \t");
    const std::string key = field.substr(0, space);
    const std::string value = space == std::string::npos ? "" : trim(field.substr(space + 1));
    if (!key.empty()) into[key] = value;
    pos = next == std::string::npos ? next : next + 1;
  }
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in = open_input(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---- AMR corpus ----

Corpus parse_amr_corpus(std::istream& in, const std::string& source_name) {
  Corpus corpus;
  corpus.source_path = source_name;
  std::vector<std::string> block;
  std::size_t block_start = 0, line_no = 0;

  auto flush = [&] {
    if (block.empty()) return;
    CorpusEntry entry;
    entry.line = block_start;
    std::string graph_text;
    for (const std::string& l : block) {
      const std::string t = trim(l);
      if (t.rfind("# ::", 0) == 0)
        parse_metadata(t, entry.metadata);
      else if (t[0] != '#')
        graph_text += l + "\n";
    }
    block.clear();
    const std::string where = "line " + std::to_string(entry.line) + ": ";
    if (blank(graph_text)) {
      // Comment-only block.
      if (!entry.metadata.empty())
        corpus.warnings.push_back(where + "record has no graph");
      return;
    }
    auto snt = entry.metadata.find("snt");
    if (snt == entry.metadata.end()) {
      corpus.warnings.push_back(where + "record has no '# ::snt' line");
      return;
    }
    entry.sentence = snt->second;
    try {
      entry.graph = parse_penman(graph_text);
    } catch (const PenmanError& e) {
      corpus.warnings.push_back(where + e.what());
      return;
    }
    if (auto v = validate(entry.graph); !v.empty()) {
      corpus.warnings.push_back(where + v.front().message);
      return;
    }
    corpus.entries.push_back(std::move(entry));
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) {
      flush();
      continue;
    }
    if (block.empty()) block_start = line_no;
    block.push_back(line);
  }
  flush();
  return corpus;
}

Corpus load_amr_corpus(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_amr_corpus(in, path);
}

void write_amr_corpus(std::ostream& out, std::span<const CorpusEntry> entries) {
  bool first = true;
  for (const CorpusEntry& e : entries) {
    if (!first) out << '\n';
    first = false;
    std::map<std::string, std::string> meta = e.metadata;
    meta.erase("snt");
    for (const auto& [k, v] : meta) out << "# ::" << k << ' ' << v << '\n';
    out << "# ::snt " << e.sentence << '\n' << serialize_penman(e.graph) << '\n';
  }
}

std::vector<AmrGraph> read_graphs(std::istream& in) {
  std::vector<AmrGraph> graphs;
  std::string buffer, line;
  std::size_t line_no = 0, start = 0;
  int depth = 0;
  bool in_quote = false;

  auto emit = [&] {
    try {
      graphs.push_back(parse_penman(buffer));
    } catch (const PenmanError& e) {
      throw IoError("graph starting at line " + std::to_string(start) + ": " + e.what());
    }
    buffer.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (buffer.empty() && trim(line).rfind('#', 0) == 0) continue;
    for (char c : line) {
      if (buffer.empty()) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (c != '(')
          throw IoError("line " + std::to_string(line_no) + ": text outside a graph");
        start = line_no;
      }
      buffer += c;
      if (c == '"') in_quote = !in_quote;
      if (in_quote) continue;
      if (c == '(') ++depth;
      if (c == ')' && --depth == 0) emit();
    }
    if (!buffer.empty()) buffer += '\n';
  }
  if (!trim(buffer).empty())
    throw IoError("graph starting at line " + std::to_string(start) +
                  ": unbalanced parentheses at end of file");
  return graphs;
}

std::vector<AmrGraph> read_graphs(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_graphs(in);
}

// ---- parallel TSV ----

TsvError::TsvError(Kind kind, std::size_t line, const std::string& detail)
    : std::runtime_error("line " + std::to_string(line) + ": " + detail),
      kind_(kind),
      line_(line) {}

std::vector<ParallelRow> parse_parallel_tsv(std::istream& in) {
  std::vector<ParallelRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 3)
      throw TsvError(TsvError::Kind::kColumnCount, line_no,
                     "expected 3 tab-separated columns, found " + std::to_string(cols.size()));
    for (std::string& c : cols) {
      c = trim(c);
      if (c.empty()) throw TsvError(TsvError::Kind::kEmptyField, line_no, "empty field");
    }
    rows.push_back({cols[0], cols[1], cols[2], line_no});
  }
  return rows;
}

std::vector<ParallelRow> read_parallel_tsv(const std::string& path) {
  std::ifstream in = open_input(path);
  return parse_parallel_tsv(in);
}

void write_parallel_tsv(std::ostream& out, std::span<const ParallelRow> rows) {
  for (const ParallelRow& r : rows)
    out << r.language << '\t' << r.sentence << '\t' << r.linearized << '\n';
}

std::vector<LanguageDataset<ParallelRow>> group_by_language(
    std::span<const ParallelRow> rows) {
  std::vector<LanguageDataset<ParallelRow>> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const ParallelRow& r : rows) {
    auto [it, inserted] = index.emplace(r.language, out.size());
    if (inserted) out.push_back({r.language, {}});
    out[it->second].examples.push_back(r);
  }
  return out;
}

std::vector<LanguageDataset<ParallelRow>> load_parallel_tsv(const std::string& path) {
  const auto rows = read_parallel_tsv(path);
  return group_by_language(rows);
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

namespace {

void add_by_frequency(Vocab& vocab, const std::map<std::string, std::size_t>& counts,
                      std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  // std::map iteration is lexicographic, so a stable sort keeps that order
  // among equal counts.
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [tok, n] : sorted)
    if (n >= min_count) vocab.add(tok);
}

}  // namespace

Vocabularies build_vocab(std::span<const ParallelRow> rows, std::size_t min_count) {
  if (rows.empty()) throw std::invalid_argument("cannot build a vocabulary from no rows");
  std::map<std::string, std::size_t> source_counts, target_counts;
  std::vector<std::string> tags;
  for (const ParallelRow& r : rows) {
    tags.push_back(Vocab::language_tag(r.language));
    for (const std::string& t : split_whitespace(r.sentence)) ++source_counts[t];
    for (const std::string& t : tokenize_linearized(r.linearized)) ++target_counts[t];
  }
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  Vocabularies v;
  for (const std::string& tag : tags) v.source.add(tag);
  add_by_frequency(v.source, source_counts, min_count);
  add_by_frequency(v.target, target_counts, min_count);
  return v;
}

Example encode_row(const ParallelRow& row, const Vocabularies& vocab) {
  const auto src = split_whitespace(row.sentence);
  const auto tgt = tokenize_linearized(row.linearized);
  return make_example(row.language, src, tgt, vocab.source, vocab.target);
}

std::vector<LanguageDataset<Example>> encode_datasets(
    std::span<const LanguageDataset<ParallelRow>> datasets, const Vocabularies& vocab) {
  std::vector<LanguageDataset<Example>> out;
  for (const auto& d : datasets) {
    LanguageDataset<Example> enc{d.language, {}};
    for (const ParallelRow& r : d.examples) enc.examples.push_back(encode_row(r, vocab));
    out.push_back(std::move(enc));
  }
  return out;
}

// ---- synthetic ----

std::vector<SyntheticLanguage> SyntheticSpec::resolved_languages() const {
  if (!languages.empty()) return languages;
  std::vector<SyntheticLanguage> out;
  for (std::size_t i = 0; i < num_languages; ++i)
    out.push_back({"l" + std::to_string(i), i > 0, i > 0 && i % 2 == 0});
  return out;
}

void validate_spec(const SyntheticSpec& s) {
  if (s.num_languages < 1) throw ConfigError("num_languages must be >= 1");
  if (s.held_out >= s.num_languages) throw ConfigError("held_out must be < num_languages");
  if (s.vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
  if (s.min_length < 1 || s.min_length > s.max_length)
    throw ConfigError("need 1 <= min_length <= max_length");
  if (!s.languages.empty()) {
    if (s.languages.size() != s.num_languages)
      throw ConfigError("languages list length differs from num_languages");
    std::vector<std::string> codes;
    for (const auto& l : s.languages) {
      if (l.code.empty() || l.code.find_first_of(" \t\n<>") != std::string::npos)
        throw ConfigError("invalid language code '" + l.code + "'");
      codes.push_back(l.code);
    }
    std::sort(codes.begin(), codes.end());
    if (std::adjacent_find(codes.begin(), codes.end()) != codes.end())
      throw ConfigError("duplicate language code");
  }
}

SyntheticSpec parse_synthetic_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("spec must be a JSON object");
  SyntheticSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "num_languages") s.num_languages = value.get<std::size_t>();
      else if (key == "vocab_size") s.vocab_size = value.get<std::size_t>();
      else if (key == "min_length") s.min_length = value.get<std::size_t>();
      else if (key == "max_length") s.max_length = value.get<std::size_t>();
      else if (key == "held_out") s.held_out = value.get<std::size_t>();
      else if (key == "train_size") s.train_size = value.get<std::size_t>();
      else if (key == "dev_size") s.dev_size = value.get<std::size_t>();
      else if (key == "test_size") s.test_size = value.get<std::size_t>();
      else if (key == "languages") {
        for (const auto& l : value)
          s.languages.push_back({l.at("code").get<std::string>(), l.value("cipher", true),
                                 l.value("swap", false)});
      } else {
        throw ConfigError("unknown spec field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad spec field: ") + e.what());
  }
  validate_spec(s);
  return s;
}

std::string synthetic_spec_json(const SyntheticSpec& s) {
  json langs = json::array();
  for (const auto& l : s.resolved_languages())
    langs.push_back({{"code", l.code}, {"cipher", l.cipher}, {"swap", l.swap}});
  json j = {{"seed", s.seed},         {"num_languages", s.num_languages},
            {"vocab_size", s.vocab_size}, {"min_length", s.min_length},
            {"max_length", s.max_length}, {"held_out", s.held_out},
            {"train_size", s.train_size}, {"dev_size", s.dev_size},
            {"test_size", s.test_size},   {"languages", langs}};
  return j.dump();
}

std::string synthetic_concept(std::size_t i) {
  static const char* const kConcepts[] = {
      "dog",    "eat-01", "bone",  "boy",      "want-01", "go-02",   "girl",
      "see-01", "cat",    "tree",  "run-02",   "house",   "book",    "read-01",
      "city",   "love-01", "child", "give-01", "water",   "drink-01", "car",
      "drive-01", "star", "prince", "rose",    "planet",  "fox",     "sheep",
      "king",   "draw-01", "fly-01", "sleep-01"};
  constexpr std::size_t n = std::size(kConcepts);
  return i < n ? kConcepts[i] : "thing-" + std::to_string(i);
}

std::vector<std::string> synthetic_target(std::span<const std::size_t> pivot) {
  std::vector<std::string> out;
  for (std::size_t d = 0; d < pivot.size(); ++d) {
    if (d > 0) out.emplace_back(d % 2 == 1 ? ":ARG0" : ":ARG1");
    out.emplace_back("(");
    out.push_back(synthetic_concept(pivot[d]));
  }
  for (std::size_t d = 0; d < pivot.size(); ++d) out.emplace_back(")");
  return out;
}

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::vector<std::vector<std::size_t>> pivots(const SyntheticSpec& s, std::size_t count,
                                             std::uint64_t stream) {
  Rng rng(derive_seed(s.seed, stream));
  std::vector<std::vector<std::size_t>> out(count);
  for (auto& p : out) {
    const std::size_t len = s.min_length + uniform_index(rng, s.max_length - s.min_length + 1);
    for (std::size_t i = 0; i < len; ++i) p.push_back(uniform_index(rng, s.vocab_size));
  }
  return out;
}

struct Surface {
  SyntheticLanguage lang;
  std::vector<std::size_t> permutation;

  std::string sentence(const std::vector<std::size_t>& pivot) const {
    std::vector<std::string> words;
    for (std::size_t w : pivot)
      words.push_back(lang.cipher ? lang.code + "_w" + std::to_string(permutation[w])
                                  : "w" + std::to_string(w));
    if (lang.swap)
      for (std::size_t i = 0; i + 1 < words.size(); i += 2) std::swap(words[i], words[i + 1]);
    return join(words);
  }
};

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  const auto langs = spec.resolved_languages();
  std::vector<Surface> surfaces;
  for (std::size_t i = 0; i < langs.size(); ++i) {
    Surface s{langs[i], {}};
    for (std::size_t w = 0; w < spec.vocab_size; ++w) s.permutation.push_back(w);
    Rng rng(derive_seed(spec.seed, 1000 + i));
    shuffle(s.permutation, rng);
    surfaces.push_back(std::move(s));
  }
  const std::size_t trained = langs.size() - spec.held_out;
  auto emit = [&](const std::vector<std::vector<std::size_t>>& piv, std::size_t languages,
                  std::vector<ParallelRow>& into) {
    for (std::size_t l = 0; l < languages; ++l)
      for (const auto& p : piv)
        into.push_back({surfaces[l].lang.code, surfaces[l].sentence(p),
                        join(synthetic_target(p)), 0});
  };
  SyntheticCorpus c;
  emit(pivots(spec, spec.train_size, 1), trained, c.train);
  emit(pivots(spec, spec.dev_size, 2), langs.size(), c.dev);
  emit(pivots(spec, spec.test_size, 3), langs.size(), c.test);
  return c;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string write_synthetic(const SyntheticSpec& spec, const SyntheticCorpus& corpus,
                            const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  json splits = json::object(), checksums = json::object();
  const std::pair<const char*, const std::vector<ParallelRow>*> parts[] = {
      {"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}};
  for (const auto& [name, rows] : parts) {
    std::ostringstream text;
    write_parallel_tsv(text, *rows);
    const std::string file = std::string(name) + ".tsv";
    std::ofstream out(fs::path(dir) / file, std::ios::binary);
    out << text.str();
    if (!out) throw IoError("cannot write '" + file + "' in '" + dir + "'");
    json sizes = json::object();
    for (const auto& d : group_by_language(*rows)) sizes[d.language] = d.examples.size();
    splits[name] = sizes;
    checksums[file] = fnv1a_hex(text.str());
  }
  json manifest = {{"spec", json::parse(synthetic_spec_json(spec))},
                   {"splits", splits},
                   {"checksums", checksums}};
  const std::string text = manifest.dump(2) + "\n";
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write manifest.json in '" + dir + "'");
  return text;
}

}  // namespace xamr
