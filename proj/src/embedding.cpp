#include "semnav/embedding.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace semnav {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double parse_double(std::string_view token, int line) {
  double v = 0.0;
  const auto* begin = token.data();
  const auto* end = token.data() + token.size();
  while (begin < end && *begin == ' ') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("embedding table line " + std::to_string(line) + ": bad number '" +
                             std::string(token) + "'");
  }
  return v;
}

}  // namespace

EmbeddingTable::EmbeddingTable(int dim, EmbeddingProvenance provenance) : dim_(dim), provenance_(provenance) {
  if (dim < 8) throw std::invalid_argument("embedding dimension must be at least 8");
}

void EmbeddingTable::insert(const std::string& label, const Eigen::VectorXd& v) {
  if (label.empty()) throw std::invalid_argument("embedding label must be non-empty");
  if (v.size() != dim_) {
    throw std::invalid_argument("embedding for '" + label + "' has dimension " + std::to_string(v.size()) +
                                ", table has " + std::to_string(dim_));
  }
  if (entries_.count(label)) throw std::invalid_argument("duplicate embedding label '" + label + "'");
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("embedding for '" + label + "' cannot be normalized");
  entries_.emplace(label, std::abs(n - 1.0) <= 1e-12 ? v : Eigen::VectorXd(v / n));
}

const Eigen::VectorXd& EmbeddingTable::at(const std::string& label) const {
  const auto it = entries_.find(label);
  if (it == entries_.end()) throw std::out_of_range("no embedding for '" + label + "'");
  return it->second;
}

Eigen::VectorXd synth_embedding(const std::string& label, int dim, std::uint64_t seed) {
  if (label.empty()) throw std::invalid_argument("synth_embedding: empty label");
  if (dim < 8) throw std::invalid_argument("synth_embedding: dim must be at least 8");
  std::mt19937_64 rng(splitmix64(fnv1a(label) ^ splitmix64(seed)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
  return v / v.norm();
}

EmbeddingTable synth_table(std::span<const std::string> labels, int dim, std::uint64_t seed) {
  EmbeddingTable t(dim, EmbeddingProvenance::Synthetic);
  for (const auto& l : labels) t.insert(l, synth_embedding(l, dim, seed));
  return t;
}

EmbeddingTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim=", 0) != 0) {
    throw std::runtime_error(path.string() + ": missing dim=<N> header");
  }
  const int dim = std::stoi(line.substr(4));
  EmbeddingTable table(dim, EmbeddingProvenance::Imported);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path.string() + " line " + std::to_string(lineno) + ": missing tab");
    }
    const std::string label = line.substr(0, tab);
    std::vector<double> values;
    std::string_view rest(line);
    rest.remove_prefix(tab + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      values.push_back(parse_double(rest.substr(0, comma), lineno));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (static_cast<int>(values.size()) != dim) {
      throw std::runtime_error(path.string() + " line " + std::to_string(lineno) + ": expected " +
                               std::to_string(dim) + " values, found " + std::to_string(values.size()));
    }
    try {
      table.insert(label, Eigen::Map<const Eigen::VectorXd>(values.data(), dim));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

void save_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "dim=" << table.dim() << "\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& [label, v] : table.entries()) {
    out << label << '\t';
    for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
    out << '\n';
  }
}

double similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("similarity: dimension mismatch");
  return a.dot(b);
}

QueryEmbedding make_query(const EmbeddingTable& table, const std::string& text) {
  return QueryEmbedding{text, table.at(text)};
}

}  // namespace semnav
