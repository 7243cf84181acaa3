#include "disem/trace.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace disem {

using nlohmann::json;

void write_trace(const std::string& path, const EnvSpec& spec, const RolloutBatch& batch, double delta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace " + path);
  out << json{{"type", "header"},     {"format", kTraceFormatVersion}, {"env", spec.label()},
              {"n_agents", spec.n_agents}, {"msg_len", batch.msg_len},   {"delta", delta}}
             .dump()
      << '\n';
  for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
    const EpisodeRecord& ep = batch.episodes[e];
    for (std::size_t t = 0; t < ep.active.size(); ++t) {
      json agents = json::array();
      for (int i = 0; i < batch.n_agents; ++i) {
        json a{{"active", ep.active[t][i] != 0}, {"reward", ep.rewards[t][i]}};
        if (ep.active[t][i]) {
          a["obs"] = ep.observations[t][i];
          a["action"] = ep.actions[t][i];
          a["message"] = ep.messages[t][i];
        }
        agents.push_back(std::move(a));
      }
      out << json{{"type", "step"}, {"episode", e}, {"t", t}, {"agents", std::move(agents)}}.dump() << '\n';
    }
  }
}

TraceMessages read_trace_messages(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  TraceMessages tm;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string type = rec.value("type", "");
    if (type == "header") {
      if (rec.at("format").get<int>() != kTraceFormatVersion) throw std::runtime_error("unsupported trace format");
      tm.msg_len = rec.at("msg_len").get<int>();
      tm.delta = rec.at("delta").get<double>();
      tm.n_agents = rec.at("n_agents").get<int>();
      tm.env_label = rec.value("env", "");
      header = true;
    } else if (type == "step") {
      if (!header) throw std::runtime_error("trace step before header");
      const auto& agents = rec.at("agents");
      for (std::size_t i = 0; i < agents.size(); ++i) {
        if (!agents[i].at("active").get<bool>()) continue;
        auto m = agents[i].at("message").get<std::vector<double>>();
        if (static_cast<int>(m.size()) != tm.msg_len)
          throw std::runtime_error("trace line " + std::to_string(line_no) + ": message length mismatch");
        tm.messages.push_back(std::move(m));
        tm.senders.push_back(static_cast<int>(i));
      }
    }
  }
  if (!header) throw std::runtime_error("trace has no header: " + path);
  return tm;
}

}  // namespace disem
