#include "synthetic.hpp"

#include <fstream>
#include <sstream>

#include <unistd.h>

#include "atp/io.hpp"
#include "atp/random.hpp"

namespace atp::testing {

namespace {

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& pool) {
  return pool[static_cast<std::size_t>(uniform_index(rng, pool.size()))];
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<std::string> filler_words() {
  std::vector<std::string> out;
  for (int i = 0; i < 40; ++i) out.push_back("fill" + std::to_string(i));
  return out;
}

}  // namespace

std::vector<Edge> random_edges(std::mt19937_64& rng, std::size_t n_types, double root_share) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n_types; ++i) {
    const std::string name = "T" + std::to_string(i);
    if (i == 0 || unit(rng) < root_share)
      edges.emplace_back(name, "ROOT");
    else
      edges.emplace_back(name, "T" + std::to_string(uniform_index(rng, i)));
  }
  return edges;
}

Corpus make_corpus(const CorpusOptions& o) {
  std::mt19937_64 rng(o.seed);
  Corpus c;
  const std::size_t n_roots = 4, n_mids = 8;
  for (std::size_t r = 0; r < n_roots; ++r) c.edges.emplace_back("syn:Root" + std::to_string(r), "ROOT");
  for (std::size_t m = 0; m < n_mids; ++m)
    c.edges.emplace_back("syn:Mid" + std::to_string(m), "syn:Root" + std::to_string(m % n_roots));
  for (std::size_t l = 0; l < o.leaf_types; ++l)
    c.edges.emplace_back("syn:Leaf" + std::to_string(l), "syn:Mid" + std::to_string(l % n_mids));

  auto chain = [&](std::size_t leaf) {
    const std::size_t mid = leaf % n_mids;
    return std::vector<std::string>{"syn:Leaf" + std::to_string(leaf), "syn:Mid" + std::to_string(mid),
                                    "syn:Root" + std::to_string(mid % n_roots)};
  };
  auto keywords = [](std::size_t leaf) {
    const std::string k = "kw" + std::to_string(leaf);
    return std::vector<std::string>{k + "a", k + "b", k + "c"};
  };

  // Zipf-like leaf frequencies.
  std::vector<double> cdf;
  double total = 0.0;
  for (std::size_t l = 0; l < o.leaf_types; ++l) cdf.push_back(total += 1.0 / static_cast<double>(l + 1));
  auto draw_leaf = [&] {
    const double u = unit(rng) * total;
    std::size_t l = 0;
    while (l + 1 < cdf.size() && cdf[l] < u) ++l;
    return l;
  };

  const auto fill = filler_words();
  auto make_question = [&](std::size_t n) {
    Question q;
    q.id = "q" + std::to_string(n);
    const double u = unit(rng);
    std::ostringstream text;
    if (u < 0.15) {
      static const std::vector<std::string> starts = {"Is", "Does", "Was", "Are"};
      text << pick(rng, starts) << ' ' << pick(rng, fill) << " a " << pick(rng, fill) << " of " << pick(rng, fill)
           << '?';
      q.category = RawCategory::boolean;
      q.types = {"boolean"};
    } else if (u < 0.25) {
      text << "How many " << pick(rng, fill) << " does " << pick(rng, fill) << " have?";
      q.category = RawCategory::literal;
      q.types = {"number"};
    } else if (u < 0.35) {
      text << "When did " << pick(rng, fill) << ' ' << pick(rng, fill) << " happen?";
      q.category = RawCategory::literal;
      q.types = {"date"};
    } else if (u < 0.45) {
      text << "What is the name of " << pick(rng, fill) << ' ' << pick(rng, fill) << '?';
      q.category = RawCategory::literal;
      q.types = {"string"};
    } else {
      const std::size_t leaf = draw_leaf();
      const auto kw = keywords(leaf);
      text << "Which " << kw[uniform_index(rng, 3)] << ' ' << pick(rng, fill) << ' ' << kw[uniform_index(rng, 3)];
      if (unit(rng) < 0.5) text << " of the mid" << leaf % n_mids << 'x';
      text << ' ' << pick(rng, fill) << '?';
      q.category = RawCategory::resource;
      q.types = chain(leaf);
    }
    q.text = text.str();
    return q;
  };

  c.train.source = c.test.source = o.source;
  c.train.split = Split::train;
  c.test.split = Split::test;
  for (std::size_t i = 0; i < o.train_questions; ++i) c.train.questions.push_back(make_question(i));
  for (std::size_t i = 0; i < o.test_questions; ++i) c.test.questions.push_back(make_question(o.train_questions + i));

  for (std::size_t l = 0; l < o.leaf_types; ++l) {
    const auto kw = keywords(l);
    for (std::size_t j = 0; j < o.entities_per_type; ++j) {
      std::ostringstream abs;
      abs << kw[0] << ' ' << pick(rng, fill) << ' ' << kw[uniform_index(rng, 3)] << ' ' << kw[uniform_index(rng, 3)]
          << " mid" << l % n_mids << "x " << pick(rng, fill);
      c.entities.push_back({"ent" + std::to_string(l) + "_" + std::to_string(j), abs.str(), chain(l)});
    }
  }
  return c;
}

void Corpus::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "train.json", to_json(train));
  write_json_file(dir / "test.json", to_json(test));
  std::string tsv;
  for (const auto& [child, parent] : edges) tsv += child + "\t" + parent + "\n";
  write_text_file(dir / "hierarchy.tsv", tsv);
  std::string ent;
  for (const auto& e : entities) {
    ent += e.id + "\t" + e.abstract + "\t";
    for (std::size_t i = 0; i < e.types.size(); ++i) ent += (i ? "," : "") + e.types[i];
    ent += "\n";
  }
  write_text_file(dir / "entities.tsv", ent);
}

QuestionSet example_questions() {
  const json doc = json::parse(R"([
    {"id": "dbpedia_1", "question": "Who are the gymnasts coached by Amanda Reddin?", "category": "resource",
     "type": ["dbo:Gymnast", "dbo:Athlete", "dbo:Person", "dbo:Agent"]},
    {"id": "dbpedia_2", "question": "How many superpowers does wonder woman have?", "category": "literal",
     "type": ["number"]},
    {"id": "dbpedia_3", "question": "When did Margaret Mead marry Gregory Bateson?", "category": "literal",
     "type": ["date"]},
    {"id": "dbpedia_4", "question": "Is Azerbaijan a member of European Go Federation?", "category": "boolean",
     "type": ["boolean"]}
  ])");
  return parse_dataset(doc, Source::dbpedia, Split::train);
}

std::vector<Edge> example_edges() {
  return {{"dbo:Agent", "ROOT"},           {"dbo:Person", "dbo:Agent"},         {"dbo:Athlete", "dbo:Person"},
          {"dbo:Gymnast", "dbo:Athlete"},  {"dbo:Species", "ROOT"},             {"dbo:Eukaryote", "dbo:Species"},
          {"dbo:Animal", "dbo:Eukaryote"}, {"dbo:Mammal", "dbo:Animal"},        {"dbo:Horse", "dbo:Mammal"},
          {"dbo:RaceHorse", "dbo:Horse"},  {"dbo:Thoroughbred", "dbo:RaceHorse"}};
}

std::filesystem::path temp_dir(const std::string& name) {
  static std::uint64_t counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("atp_test_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace atp::testing
