#pragma once

// Commonsense triple store: ingestion from ConceptNet-style dumps, relation
// grouping, reversed twins, sorted adjacency and a compact binary format.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "grf/error.hpp"
#include "grf/io.hpp"
#include "grf/text.hpp"

namespace grf {

struct ConceptId {
  std::uint32_t value = 0;
  auto operator<=>(const ConceptId&) const = default;
};

/// Index into the canonical relation list plus a direction flag.
struct RelationId {
  std::uint32_t id = 0;
  bool is_inverse = false;

  RelationId inverse() const { return {id, !is_inverse}; }
  /// Dense index: forward relations first, then their inverses.
  std::uint32_t flat(std::size_t num_canonical) const {
    return is_inverse ? id + static_cast<std::uint32_t>(num_canonical) : id;
  }
  auto operator<=>(const RelationId&) const = default;
};

class RelationVocab {
 public:
  RelationVocab() = default;
  explicit RelationVocab(std::vector<std::string> canonical) : names_(std::move(canonical)) {}

  std::size_t num_canonical() const { return names_.size(); }
  /// Forward plus inverse relations.
  std::size_t size() const { return 2 * names_.size(); }
  const std::vector<std::string>& canonical() const { return names_; }

  RelationId from_flat(std::size_t flat) const {
    if (flat >= size()) throw Error(ErrorCode::InvalidId, "relation index " + std::to_string(flat) + " out of range");
    const bool inv = flat >= names_.size();
    return {static_cast<std::uint32_t>(inv ? flat - names_.size() : flat), inv};
  }

  std::uint32_t flat(RelationId r) const { return r.flat(names_.size()); }

  std::string name(RelationId r) const {
    if (r.id >= names_.size()) throw Error(ErrorCode::InvalidId, "relation id " + std::to_string(r.id) + " out of range");
    return r.is_inverse ? names_[r.id] + "_inv" : names_[r.id];
  }

  std::optional<RelationId> find(std::string_view name) const {
    std::string n(name);
    bool inv = false;
    if (n.size() > 4 && n.compare(n.size() - 4, 4, "_inv") == 0) {
      inv = true;
      n.resize(n.size() - 4);
    }
    auto it = std::find(names_.begin(), names_.end(), n);
    if (it == names_.end()) return std::nullopt;
    return RelationId{static_cast<std::uint32_t>(it - names_.begin()), inv};
  }

  bool operator==(const RelationVocab&) const = default;

 private:
  std::vector<std::string> names_;
};

struct Triple {
  ConceptId head;
  RelationId relation;
  ConceptId tail;
  float weight = 1.0f;
};

/// One outgoing adjacency entry.
struct Edge {
  RelationId relation;
  ConceptId tail;
  float weight = 1.0f;

  bool operator==(const Edge&) const = default;
};

/// Raw relation name -> canonical group (or DROP). Keys are normalised: leading
/// "/r/" stripped, lowercased. A `reverse` entry swaps head and tail while grouping.
class RelationMap {
 public:
  struct Entry {
    std::string group;  // empty when dropped
    bool drop = false;
    bool reverse = false;
  };

  static std::string normalize(std::string_view raw) {
    std::string s(raw);
    if (s.rfind("/r/", 0) == 0) s = s.substr(3);
    return to_lower(s);
  }

  void add(std::string_view raw, std::string group, bool reverse = false) {
    Entry e;
    if (group == "DROP") {
      e.drop = true;
    } else {
      e.group = to_lower(group);
      e.reverse = reverse;
    }
    entries_[normalize(raw)] = std::move(e);
  }

  /// TSV lines: raw<TAB>group[<TAB>reverse]; group may be DROP.
  static RelationMap parse(std::string_view text, const std::string& origin = "relation map") {
    RelationMap m;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto f = io::split(line, '\t');
      if (f.size() < 2 || f[0].empty() || f[1].empty())
        throw Error(ErrorCode::Format, origin + ":" + std::to_string(no) + ": expected raw<TAB>group[<TAB>reverse]");
      const bool rev = f.size() >= 3 && to_lower(f[2]) == "reverse";
      m.add(f[0], f[1], rev);
    }
    return m;
  }

  static RelationMap load(const std::string& path) { return parse(io::read_file(path), path); }

  const Entry* find(std::string_view raw) const {
    auto it = entries_.find(normalize(raw));
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// Sorted distinct group names.
  std::vector<std::string> groups() const {
    std::vector<std::string> g;
    for (const auto& [k, e] : entries_)
      if (!e.drop) g.push_back(e.group);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
  }

 private:
  std::map<std::string, Entry> entries_;
};

/// Immutable concept graph. Concepts are sorted by surface, so the surface ->
/// id index is a binary search and ids do not depend on input order.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  /// Builds from forward triples over `surfaces` (need not be sorted or unique
  /// in usage). Adds the reversed twin of each, merges duplicates by max weight.
  static KnowledgeGraph build(RelationVocab relations, std::vector<std::string> surfaces,
                              const std::vector<std::tuple<std::string, std::string, std::string, float>>& forward) {
    std::sort(surfaces.begin(), surfaces.end());
    surfaces.erase(std::unique(surfaces.begin(), surfaces.end()), surfaces.end());
    KnowledgeGraph kg;
    kg.relations_ = std::move(relations);
    kg.concepts_ = std::move(surfaces);
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, float> merged;
    for (const auto& [h, r, t, w] : forward) {
      auto hid = kg.find(h), tid = kg.find(t);
      auto rid = kg.relations_.find(r);
      if (!hid || !tid) throw Error(ErrorCode::InvalidId, "unknown concept in triple (" + h + ", " + r + ", " + t + ")");
      if (!rid || rid->is_inverse) throw Error(ErrorCode::UnknownRelation, "unknown relation '" + r + "'");
      if (*hid == *tid) continue;
      auto key = std::make_tuple(hid->value, rid->id, tid->value);
      auto [it, fresh] = merged.emplace(key, w);
      if (!fresh) it->second = std::max(it->second, w);
    }
    kg.install(merged);
    return kg;
  }

  const RelationVocab& relations() const { return relations_; }
  std::size_t num_concepts() const { return concepts_.size(); }
  const std::vector<std::string>& concepts() const { return concepts_; }

  const std::string& surface(ConceptId c) const {
    check(c);
    return concepts_[c.value];
  }

  std::optional<ConceptId> find(std::string_view lemma) const {
    auto it = std::lower_bound(concepts_.begin(), concepts_.end(), lemma);
    if (it == concepts_.end() || *it != lemma) return std::nullopt;
    return ConceptId{static_cast<std::uint32_t>(it - concepts_.begin())};
  }

  bool contains(std::string_view lemma) const { return find(lemma).has_value(); }

  /// Outgoing edges of c, sorted by (relation, tail); includes inverse edges.
  std::span<const Edge> neighbors(ConceptId c) const {
    check(c);
    return std::span<const Edge>(adjacency_[c.value]);
  }

  /// Stored triple count, reversed twins included (= 2 x forward).
  std::size_t num_triples() const {
    std::size_t n = 0;
    for (const auto& a : adjacency_) n += a.size();
    return n;
  }

  std::vector<Triple> triples() const {
    std::vector<Triple> out;
    for (std::uint32_t h = 0; h < adjacency_.size(); ++h)
      for (const auto& e : adjacency_[h]) out.push_back({ConceptId{h}, e.relation, e.tail, e.weight});
    return out;
  }

  bool operator==(const KnowledgeGraph& o) const {
    return relations_ == o.relations_ && concepts_ == o.concepts_ && adjacency_ == o.adjacency_;
  }

  static constexpr std::string_view kMagic = "GRFKG1";

  /// "GRFKG1", u32 header length, JSON header, then forward triples as
  /// u32 heads[n], u32 relations[n], u32 tails[n], f32 weights[n] (little-endian).
  std::string serialize() const {
    std::vector<Triple> fwd;
    for (const auto& t : triples())
      if (!t.relation.is_inverse) fwd.push_back(t);
    nlohmann::json header = {{"format", std::string(kMagic)},
                             {"version", 1},
                             {"concepts", concepts_},
                             {"relations", relations_.canonical()},
                             {"num_forward", fwd.size()}};
    const std::string h = header.dump();
    std::string out(kMagic);
    io::put_u32(out, static_cast<std::uint32_t>(h.size()));
    out += h;
    for (const auto& t : fwd) io::put_u32(out, t.head.value);
    for (const auto& t : fwd) io::put_u32(out, t.relation.id);
    for (const auto& t : fwd) io::put_u32(out, t.tail.value);
    for (const auto& t : fwd) io::put_f32(out, t.weight);
    return out;
  }

  static KnowledgeGraph deserialize(std::string_view bytes, const std::string& origin = "graph") {
    io::ByteReader rd(bytes, origin);
    if (bytes.empty()) rd.fail("empty file");
    if (rd.take(kMagic.size()) != kMagic)
      throw Error(ErrorCode::Version, origin + ": bad magic/version (expected GRFKG1) at byte offset 0");
    const std::uint32_t hlen = rd.u32();
    const std::size_t hoff = rd.offset();
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(rd.take(hlen));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Format, origin + ": bad JSON header at byte offset " + std::to_string(hoff) + ": " + e.what());
    }
    KnowledgeGraph kg;
    std::size_t n = 0;
    try {
      if (header.at("version").get<int>() != 1)
        throw Error(ErrorCode::Version, origin + ": unsupported version at byte offset " + std::to_string(hoff));
      kg.concepts_ = header.at("concepts").get<std::vector<std::string>>();
      kg.relations_ = RelationVocab(header.at("relations").get<std::vector<std::string>>());
      n = header.at("num_forward").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Format, origin + ": incomplete header at byte offset " + std::to_string(hoff) + ": " + e.what());
    }
    if (!std::is_sorted(kg.concepts_.begin(), kg.concepts_.end()))
      throw Error(ErrorCode::Format, origin + ": concept list not sorted at byte offset " + std::to_string(hoff));
    std::vector<std::uint32_t> hs(n), rs(n), ts(n);
    std::vector<float> ws(n);
    for (auto& v : hs) v = rd.u32();
    for (auto& v : rs) v = rd.u32();
    for (auto& v : ts) v = rd.u32();
    for (auto& v : ws) v = rd.f32();
    if (!rd.at_end()) rd.fail("trailing bytes");
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, float> fwd;
    for (std::size_t i = 0; i < n; ++i) {
      if (hs[i] >= kg.concepts_.size() || ts[i] >= kg.concepts_.size() || rs[i] >= kg.relations_.num_canonical())
        throw Error(ErrorCode::Format, origin + ": triple " + std::to_string(i) + " references an invalid id");
      fwd[{hs[i], rs[i], ts[i]}] = ws[i];
    }
    kg.install(fwd);
    return kg;
  }

  void save(const std::string& path) const { io::write_file(path, serialize()); }
  static KnowledgeGraph load(const std::string& path) { return deserialize(io::read_file(path), path); }

 private:
  void check(ConceptId c) const {
    if (c.value >= concepts_.size())
      throw Error(ErrorCode::InvalidId, "concept id " + std::to_string(c.value) + " out of range (" +
                                            std::to_string(concepts_.size()) + " concepts)");
  }

  void install(const std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, float>& fwd) {
    adjacency_.assign(concepts_.size(), {});
    const std::size_t nc = relations_.num_canonical();
    for (const auto& [key, w] : fwd) {
      const auto [h, r, t] = key;
      adjacency_[h].push_back({RelationId{r, false}, ConceptId{t}, w});
      adjacency_[t].push_back({RelationId{r, true}, ConceptId{h}, w});
    }
    for (auto& a : adjacency_)
      std::sort(a.begin(), a.end(), [nc](const Edge& x, const Edge& y) {
        return std::make_pair(x.relation.flat(nc), x.tail) < std::make_pair(y.relation.flat(nc), y.tail);
      });
  }

  RelationVocab relations_;
  std::vector<std::string> concepts_;
  std::vector<std::vector<Edge>> adjacency_;
};

struct IngestOptions {
  WordSet stopwords;
  Lemmatizer lemmatizer;
  std::string language = "en";
};

struct IngestReport {
  std::vector<std::pair<std::size_t, std::string>> skipped;  // malformed lines
  std::size_t lines = 0;
  std::size_t kept = 0;  // forward triples before de-duplication
  std::size_t non_english = 0;
  std::size_t multi_word = 0;
  std::size_t stop_word = 0;
  std::size_t self_loop = 0;
  std::size_t dropped_relation = 0;

  /// `<line_no><TAB><reason>` per malformed line.
  std::string skip_report() const {
    std::string out;
    for (const auto& [no, why] : skipped) out += std::to_string(no) + "\t" + why + "\n";
    return out;
  }
};

struct IngestResult {
  KnowledgeGraph graph;
  IngestReport report;
};

namespace detail {

/// "/c/en/ice_cream/n" -> ("en", "ice_cream"); nullopt when not a concept URI.
inline std::optional<std::pair<std::string, std::string>> parse_concept_uri(std::string_view uri) {
  auto parts = io::split(uri, '/');
  if (parts.size() < 4 || !parts[0].empty() || parts[1] != "c" || parts[2].empty() || parts[3].empty()) return std::nullopt;
  return std::make_pair(parts[2], parts[3]);
}

}  // namespace detail

/// Reads either ConceptNet 5 assertion rows (`uri  /r/Rel  /c/en/head  /c/en/tail  {json}`)
/// or simple rows (`head  relation  tail  [weight]`), detected per line.
/// Malformed lines go to the skip report; an unmapped relation is a hard error.
inline IngestResult ingest(std::istream& in, const RelationMap& map, const IngestOptions& opt) {
  IngestResult res;
  auto& rep = res.report;
  RelationVocab rels(map.groups());
  std::vector<std::tuple<std::string, std::string, std::string, float>> forward;
  std::vector<std::string> surfaces;

  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    ++rep.lines;
    auto f = io::split(line, '\t');
    std::string raw_rel, head, tail;
    float weight = 1.0f;
    if (f.size() >= 4 && f[1].rfind("/r/", 0) == 0) {
      raw_rel = f[1];
      auto h = detail::parse_concept_uri(f[2]);
      auto t = detail::parse_concept_uri(f[3]);
      if (!h || !t) {
        rep.skipped.emplace_back(no, "bad concept uri");
        continue;
      }
      if (h->first != opt.language || t->first != opt.language) {
        ++rep.non_english;
        continue;
      }
      head = h->second;
      tail = t->second;
      if (f.size() >= 5 && !f[4].empty()) {
        try {
          auto meta = nlohmann::json::parse(f[4]);
          if (meta.contains("weight")) weight = meta.at("weight").get<float>();
        } catch (const nlohmann::json::exception&) {
          rep.skipped.emplace_back(no, "bad metadata json");
          continue;
        }
      }
    } else if (f.size() == 3 || f.size() == 4) {
      head = f[0];
      raw_rel = f[1];
      tail = f[2];
      if (f.size() == 4) {
        try {
          std::size_t used = 0;
          weight = std::stof(f[3], &used);
          if (used != f[3].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          rep.skipped.emplace_back(no, "bad weight");
          continue;
        }
      }
    } else {
      rep.skipped.emplace_back(no, "expected 3-4 tab-separated fields or a ConceptNet assertion row");
      continue;
    }
    if (head.empty() || tail.empty() || raw_rel.empty()) {
      rep.skipped.emplace_back(no, "empty field");
      continue;
    }
    if (!(weight >= 0.0f)) {
      rep.skipped.emplace_back(no, "negative or NaN weight");
      continue;
    }
    const auto* entry = map.find(raw_rel);
    if (!entry) {
      throw Error(ErrorCode::UnknownRelation,
                  "line " + std::to_string(no) + ": relation '" + raw_rel + "' has no entry in the relation map");
    }
    auto one_gram = [](const std::string& s) { return s.find_first_of("_ \t") == std::string::npos; };
    if (!one_gram(head) || !one_gram(tail)) {
      ++rep.multi_word;
      continue;
    }
    if (entry->drop) {
      ++rep.dropped_relation;
      continue;
    }
    head = opt.lemmatizer.lemmatize(head);
    tail = opt.lemmatizer.lemmatize(tail);
    if (opt.stopwords.contains(head) || opt.stopwords.contains(tail)) {
      ++rep.stop_word;
      continue;
    }
    if (head == tail) {
      ++rep.self_loop;
      continue;
    }
    if (entry->reverse) std::swap(head, tail);
    surfaces.push_back(head);
    surfaces.push_back(tail);
    forward.emplace_back(head, entry->group, tail, weight);
    ++rep.kept;
  }
  res.graph = KnowledgeGraph::build(std::move(rels), std::move(surfaces), forward);
  return res;
}

inline IngestResult ingest_file(const std::string& path, const RelationMap& map, const IngestOptions& opt) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return ingest(in, map, opt);
}

}  // namespace grf
