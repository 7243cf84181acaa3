#include "disem/config.hpp"

#include <fstream>
#include <stdexcept>

namespace disem {

using nlohmann::json;

namespace {

double as_double(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == s.size() && !s.empty()) return d;
  }
  throw std::invalid_argument("config key " + key + " expects a number");
}

long long as_int(const json& v, const std::string& key) {
  const double d = as_double(v, key);
  if (d != static_cast<double>(static_cast<long long>(d)))
    throw std::invalid_argument("config key " + key + " expects an integer");
  return static_cast<long long>(d);
}

std::uint64_t as_u64(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t used = 0;
    std::uint64_t u = 0;
    try {
      u = std::stoull(s, &used, 0);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == s.size() && !s.empty()) return u;
  }
  const long long i = as_int(v, key);
  if (i < 0) throw std::invalid_argument("config key " + key + " must be non-negative");
  return static_cast<std::uint64_t>(i);
}

bool as_bool(const json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
  }
  if (v.is_number_integer()) return v.get<long long>() != 0;
  throw std::invalid_argument("config key " + key + " expects a boolean");
}

std::string as_string(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  throw std::invalid_argument("config key " + key + " expects a string");
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) flatten(v, key, out);
    else out.emplace_back(key, v);
  }
}

}  // namespace

void set_dotted(json& j, const std::string& key, const json& value) {
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "run.seed",           "run.out_dir",         "run.threads",         "env.task",
      "env.setting",        "env.gamma",           "agent.scheme",        "agent.hidden",
      "agent.msg_len",      "agent.share_params",  "agent.key_dim",       "agent.train_delivery",
      "quantizer.delta",    "entropy.epsilon",     "entropy.log_base",    "train.variant",
      "train.t_n",          "train.t_max",         "train.alpha_p",       "train.lr",
      "train.momentum",     "train.optimizer",     "train.episodes_per_epoch", "train.grad_clip",
      "train.difem_var_eps", "eval.episodes",      "eval.metric_episodes", "eval.every",
      "eval.seed"};
  return k;
}

RunConfig RunConfig::defaults(Task task, Setting setting) {
  RunConfig c;
  c.env = EnvSpec::make(task, setting);
  c.schedule = TrainSchedule::for_task(task);
  return c;
}

void RunConfig::set(const std::string& key, const json& v) {
  if (key == "run.seed") seed = as_u64(v, key);
  else if (key == "run.out_dir") out_dir = as_string(v, key);
  else if (key == "run.threads") threads = static_cast<int>(as_int(v, key));
  else if (key == "env.task" || key == "env.setting") {
    const Task task = key == "env.task" ? parse_task(as_string(v, key)) : env.task;
    const Setting setting = key == "env.setting" ? parse_setting(as_string(v, key)) : env.setting;
    const double gamma = env.gamma;
    env = EnvSpec::make(task, setting);
    env.gamma = gamma;
  } else if (key == "env.gamma") env.gamma = as_double(v, key);
  else if (key == "agent.scheme") agent.scheme = parse_scheme(as_string(v, key));
  else if (key == "agent.hidden") agent.hidden = static_cast<int>(as_int(v, key));
  else if (key == "agent.msg_len") agent.msg_len = static_cast<int>(as_int(v, key));
  else if (key == "agent.share_params") agent.share_params = as_bool(v, key);
  else if (key == "agent.key_dim") agent.key_dim = static_cast<int>(as_int(v, key));
  else if (key == "agent.train_delivery") agent.train_delivery = parse_delivery(as_string(v, key));
  else if (key == "quantizer.delta") schedule.delta = as_double(v, key);
  else if (key == "entropy.epsilon") schedule.epsilon = as_double(v, key);
  else if (key == "entropy.log_base") {
    if (as_double(v, key) != 2.0) throw std::invalid_argument("entropy.log_base is fixed to 2");
  } else if (key == "train.variant") schedule.variant = parse_variant(as_string(v, key));
  else if (key == "train.t_n") schedule.t_n = static_cast<int>(as_int(v, key));
  else if (key == "train.t_max") schedule.t_max = static_cast<int>(as_int(v, key));
  else if (key == "train.alpha_p") schedule.alpha_p = as_double(v, key);
  else if (key == "train.lr") schedule.lr = as_double(v, key);
  else if (key == "train.momentum") schedule.momentum = as_double(v, key);
  else if (key == "train.optimizer") {
    const std::string s = as_string(v, key);
    if (s == "sgd") schedule.optimizer = OptimizerKind::kSgd;
    else if (s == "adam") schedule.optimizer = OptimizerKind::kAdam;
    else throw std::invalid_argument("train.optimizer must be sgd or adam");
  } else if (key == "train.episodes_per_epoch") schedule.episodes_per_epoch = static_cast<int>(as_int(v, key));
  else if (key == "train.grad_clip") schedule.grad_clip = as_double(v, key);
  else if (key == "train.difem_var_eps") schedule.difem_var_eps = as_double(v, key);
  else if (key == "eval.episodes") eval_episodes = static_cast<int>(as_int(v, key));
  else if (key == "eval.metric_episodes") metric_episodes = static_cast<int>(as_int(v, key));
  else if (key == "eval.every") eval_every = static_cast<int>(as_int(v, key));
  else if (key == "eval.seed") eval_seed = as_u64(v, key);
  else throw std::invalid_argument("unknown config key: " + key);
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  std::vector<std::pair<std::string, json>> leaves;
  flatten(j, "", leaves);
  Task task = Task::kPredatorPrey;
  Setting setting = Setting::kA;
  for (const auto& [k, v] : leaves) {
    if (k == "env.task") task = parse_task(as_string(v, k));
    if (k == "env.setting") setting = parse_setting(as_string(v, k));
  }
  RunConfig c = defaults(task, setting);
  for (const auto& [k, v] : leaves)
    if (k != "env.task" && k != "env.setting") c.set(k, v);
  c.validate();
  return c;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  const char* optimizer = schedule.optimizer == OptimizerKind::kSgd ? "sgd" : "adam";
  return json{
      {"run", {{"seed", seed}, {"out_dir", out_dir}, {"threads", threads}}},
      {"env", {{"task", to_string(env.task)}, {"setting", to_string(env.setting)}, {"gamma", env.gamma}}},
      {"agent",
       {{"scheme", to_string(agent.scheme)},
        {"hidden", agent.hidden},
        {"msg_len", agent.msg_len},
        {"share_params", agent.share_params},
        {"key_dim", agent.key_dim},
        {"train_delivery", to_string(agent.train_delivery)}}},
      {"quantizer", {{"delta", schedule.delta}}},
      {"entropy", {{"epsilon", schedule.epsilon}, {"log_base", 2}}},
      {"train",
       {{"variant", to_string(schedule.variant)},
        {"t_n", schedule.t_n},
        {"t_max", schedule.t_max},
        {"alpha_p", schedule.alpha_p},
        {"lr", schedule.lr},
        {"momentum", schedule.momentum},
        {"optimizer", optimizer},
        {"episodes_per_epoch", schedule.episodes_per_epoch},
        {"grad_clip", schedule.grad_clip},
        {"difem_var_eps", schedule.difem_var_eps}}},
      {"eval",
       {{"episodes", eval_episodes},
        {"metric_episodes", metric_episodes},
        {"every", eval_every},
        {"seed", eval_seed}}},
  };
}

void RunConfig::validate() const {
  env.validate();
  schedule.validate();
  Quantizer check(schedule.delta);
  (void)check;
  if (agent.hidden < 1 || agent.msg_len < 1 || agent.key_dim < 1)
    throw std::invalid_argument("agent sizes must be positive");
  if (eval_episodes < 1 || metric_episodes < 1 || eval_every < 1)
    throw std::invalid_argument("eval counts must be positive");
}

}  // namespace disem
