#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mstgad/telemetry.hpp"

namespace mstgad {

std::string LogTemplate::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> tokenize_log(const std::string& message) {
  std::vector<std::string> tokens;
  std::istringstream is(message);
  std::string tok;
  while (is >> tok) tokens.push_back(tok);
  return tokens;
}

namespace {

bool has_digit(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Fraction of positions where the cluster template token equals the message
// token; wildcards do not count toward similarity during mining.
double seq_similarity(const std::vector<std::string>& tmpl, const std::vector<std::string>& msg) {
  if (tmpl.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < tmpl.size(); ++i)
    if (tmpl[i] == msg[i] && tmpl[i] != kWildcard) ++same;
  return double(same) / double(tmpl.size());
}

struct Cluster {
  int id;
  std::vector<std::string> tokens;
};

struct Node {
  std::map<std::string, std::unique_ptr<Node>> children;
  std::vector<std::unique_ptr<Cluster>> clusters;
};

}  // namespace

struct TemplateMiner::Impl {
  MinerConfig cfg;
  Node root;
  std::vector<Cluster*> by_id;

  Node* route(const std::vector<std::string>& tokens) {
    Node* node = &root;
    std::string len_key = std::to_string(tokens.size());
    node = child(node, len_key);
    int token_levels = std::max(0, cfg.depth - 2);
    for (int level = 0; level < token_levels; ++level) {
      if (std::size_t(level) >= tokens.size()) break;
      const std::string& tok = tokens[level];
      std::string key = has_digit(tok) ? kWildcard : tok;
      if (!node->children.count(key) && key != kWildcard &&
          int(node->children.size()) >= cfg.max_children)
        key = kWildcard;
      node = child(node, key);
    }
    return node;
  }

  static Node* child(Node* node, const std::string& key) {
    auto& slot = node->children[key];
    if (!slot) slot = std::make_unique<Node>();
    return slot.get();
  }
};

TemplateMiner::TemplateMiner(MinerConfig cfg) : impl_(std::make_unique<Impl>()) {
  impl_->cfg = cfg;
}
TemplateMiner::~TemplateMiner() = default;
TemplateMiner::TemplateMiner(TemplateMiner&&) noexcept = default;
TemplateMiner& TemplateMiner::operator=(TemplateMiner&&) noexcept = default;

int TemplateMiner::add_message(const std::string& message) {
  auto tokens = tokenize_log(message);
  Node* leaf = impl_->route(tokens);

  Cluster* best = nullptr;
  double best_sim = -1.0;
  for (auto& c : leaf->clusters) {
    if (c->tokens.size() != tokens.size()) continue;
    double sim = seq_similarity(c->tokens, tokens);
    if (sim > best_sim) {
      best_sim = sim;
      best = c.get();
    }
  }
  if (best && best_sim >= impl_->cfg.similarity_threshold) {
    for (std::size_t i = 0; i < tokens.size(); ++i)
      if (best->tokens[i] != tokens[i]) best->tokens[i] = kWildcard;
    return best->id;
  }
  auto cluster = std::make_unique<Cluster>();
  cluster->id = int(impl_->by_id.size());
  cluster->tokens = tokens;
  impl_->by_id.push_back(cluster.get());
  leaf->clusters.push_back(std::move(cluster));
  return impl_->by_id.back()->id;
}

std::vector<LogTemplate> TemplateMiner::templates() const {
  std::vector<LogTemplate> out;
  out.reserve(impl_->by_id.size());
  for (const Cluster* c : impl_->by_id) out.push_back({c->id, c->tokens});
  return out;
}

std::vector<LogTemplate> mine_log_templates(const std::vector<LogRecord>& logs,
                                            const MinerConfig& cfg) {
  TemplateMiner miner(cfg);
  for (const auto& rec : logs) miner.add_message(rec.message);
  return miner.templates();
}

int match_template(const std::string& message, const std::vector<LogTemplate>& templates,
                   double similarity_threshold) {
  auto tokens = tokenize_log(message);
  int best_id = unknown_template_id(templates);
  double best_sim = -1.0;
  for (const auto& t : templates) {
    if (t.tokens.size() != tokens.size()) continue;
    // Wildcards match any token when scoring an already-mined template.
    std::size_t same = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i)
      if (t.tokens[i] == kWildcard || t.tokens[i] == tokens[i]) ++same;
    double sim = tokens.empty() ? 1.0 : double(same) / double(tokens.size());
    if (sim > best_sim) {
      best_sim = sim;
      best_id = t.template_id;
    }
  }
  if (best_sim < similarity_threshold) return unknown_template_id(templates);
  return best_id;
}

}  // namespace mstgad
