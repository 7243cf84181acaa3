#include "disem/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace disem {

std::string to_string(Task task) {
  switch (task) {
    case Task::kTreasureHunt: return "treasure_hunt";
    case Task::kPredatorPrey: return "predator_prey";
    case Task::kTrafficJunction: return "traffic_junction";
  }
  return "?";
}

std::string to_string(Setting setting) { return setting == Setting::kA ? "A" : "B"; }

std::string short_name(Task task) {
  switch (task) {
    case Task::kTreasureHunt: return "TH";
    case Task::kPredatorPrey: return "PP";
    case Task::kTrafficJunction: return "TJ";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  if (s == "treasure_hunt" || s == "TH" || s == "th") return Task::kTreasureHunt;
  if (s == "predator_prey" || s == "PP" || s == "pp") return Task::kPredatorPrey;
  if (s == "traffic_junction" || s == "TJ" || s == "tj") return Task::kTrafficJunction;
  throw std::invalid_argument("unknown task: " + s);
}

Setting parse_setting(const std::string& s) {
  if (s == "A" || s == "a") return Setting::kA;
  if (s == "B" || s == "b") return Setting::kB;
  throw std::invalid_argument("unknown setting: " + s);
}

EnvSpec EnvSpec::make(Task task, Setting setting) {
  EnvSpec s;
  s.task = task;
  s.setting = setting;
  const bool a = setting == Setting::kA;
  switch (task) {
    case Task::kTreasureHunt:
      s.n_agents = a ? 3 : 6;
      s.speed = a ? 0.15 : 0.09;
      s.t_max = a ? 20 : 60;
      s.collect_radius = 0.1;
      break;
    case Task::kPredatorPrey:
      s.n_agents = a ? 3 : 5;
      s.grid = a ? 5 : 10;
      s.t_max = a ? 20 : 40;
      s.vision = a ? 0 : 1;
      break;
    case Task::kTrafficJunction:
      s.n_agents = a ? 5 : 10;
      s.p_arrive = a ? 0.3 : 0.05;
      s.t_max = a ? 20 : 40;
      s.grid = a ? 7 : 14;
      break;
  }
  return s;
}

int EnvSpec::num_actions() const {
  switch (task) {
    case Task::kTreasureHunt: return 9;
    case Task::kPredatorPrey: return 5;
    case Task::kTrafficJunction: return 2;
  }
  return 0;
}

int EnvSpec::obs_dim() const {
  switch (task) {
    case Task::kTreasureHunt: return 5;
    case Task::kPredatorPrey: return 3 + (vision > 0 ? (2 * vision + 1) * (2 * vision + 1) : 0);
    case Task::kTrafficJunction: return grid * grid + 3;
  }
  return 0;
}

std::string EnvSpec::label() const { return short_name(task) + "-" + to_string(setting); }

void EnvSpec::validate() const {
  if (n_agents < 1) throw std::invalid_argument("env needs at least one agent");
  if (t_max < 1) throw std::invalid_argument("env t_max must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("env gamma must be in (0, 1]");
  switch (task) {
    case Task::kTreasureHunt:
      if (!(speed > 0.0) || !(collect_radius > 0.0))
        throw std::invalid_argument("treasure hunt needs positive speed and radius");
      break;
    case Task::kPredatorPrey:
      if (grid < 2 || vision < 0) throw std::invalid_argument("predator prey needs D >= 2, vision >= 0");
      if (n_agents + 1 > grid * grid) throw std::invalid_argument("predator prey grid too small");
      break;
    case Task::kTrafficJunction:
      if (grid < 3 || !(p_arrive >= 0.0 && p_arrive <= 1.0))
        throw std::invalid_argument("traffic junction needs grid >= 3 and p_arrive in [0, 1]");
      break;
  }
}

// ---------------------------------------------------------------------------

std::vector<Observation> Environment::reset(std::uint64_t seed) {
  rng_.seed(seed);
  t_ = 0;
  done_ = false;
  reset_world();
  return observe_all();
}

StepResult Environment::step(std::span<const int> actions) {
  if (done_) throw std::logic_error("step() on a finished episode");
  if (actions.size() != static_cast<std::size_t>(spec_.n_agents))
    throw std::invalid_argument("expected one action per agent slot");
  for (int i = 0; i < spec_.n_agents; ++i)
    if (active(i) && (actions[i] < 0 || actions[i] >= spec_.num_actions()))
      throw std::out_of_range("action out of range for agent " + std::to_string(i));
  ++t_;
  StepResult r = advance(actions);
  if (t_ >= spec_.t_max) r.done = true;
  done_ = r.done;
  r.observations = observe_all();
  return r;
}

std::vector<Observation> Environment::observe_all() const {
  std::vector<Observation> obs;
  obs.reserve(spec_.n_agents);
  for (int i = 0; i < spec_.n_agents; ++i) obs.push_back(observe(i));
  return obs;
}

std::unique_ptr<Environment> make_environment(const EnvSpec& spec) {
  switch (spec.task) {
    case Task::kTreasureHunt: return std::make_unique<TreasureHunt>(spec);
    case Task::kPredatorPrey: return std::make_unique<PredatorPrey>(spec);
    case Task::kTrafficJunction: return std::make_unique<TrafficJunction>(spec);
  }
  throw std::invalid_argument("unknown task");
}

// ---------------------------------------------------------------------------
// Treasure hunt

TreasureHunt::TreasureHunt(EnvSpec spec) : Environment(std::move(spec)) {
  if (spec_.task != Task::kTreasureHunt) throw std::invalid_argument("spec is not a treasure hunt");
}

void TreasureHunt::reset_world() {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = spec_.n_agents;
  agents_.assign(n, {});
  treasures_.assign(n, {});
  for (auto& p : agents_) p = {u(rng_), u(rng_)};
  for (auto& p : treasures_) p = {u(rng_), u(rng_)};
  found_.assign(n, false);
}

void TreasureHunt::place(std::vector<Point> agents, std::vector<Point> treasures) {
  if (agents.size() != agents_.size() || treasures.size() != treasures_.size())
    throw std::invalid_argument("placement size mismatch");
  agents_ = std::move(agents);
  treasures_ = std::move(treasures);
  found_.assign(agents_.size(), false);
}

StepResult TreasureHunt::advance(std::span<const int> actions) {
  const int n = spec_.n_agents;
  for (int i = 0; i < n; ++i) {
    if (actions[i] == kStay) continue;
    const double angle = actions[i] * std::numbers::pi / 4.0;
    agents_[i].x = std::clamp(agents_[i].x + spec_.speed * std::cos(angle), 0.0, 1.0);
    agents_[i].y = std::clamp(agents_[i].y + spec_.speed * std::sin(angle), 0.0, 1.0);
  }
  StepResult r;
  r.rewards.assign(n, -kStepPenalty);
  const double r2 = spec_.collect_radius * spec_.collect_radius;
  for (int owner = 0; owner < n; ++owner) {
    if (found_[owner]) continue;
    for (int j = 0; j < n; ++j) {
      if (j == owner) continue;  // an agent cannot collect its own treasure
      const double dx = agents_[j].x - treasures_[owner].x;
      const double dy = agents_[j].y - treasures_[owner].y;
      if (dx * dx + dy * dy <= r2) {
        found_[owner] = true;
        for (double& rw : r.rewards) rw += 1.0;
        break;
      }
    }
  }
  r.done = success();
  return r;
}

Observation TreasureHunt::observe(int agent) const {
  const auto& a = agents_.at(agent);
  const auto& tr = treasures_.at(agent);
  return {a.x, a.y, tr.x, tr.y, static_cast<double>(t_) / spec_.t_max};
}

bool TreasureHunt::success() const {
  return std::all_of(found_.begin(), found_.end(), [](bool f) { return f; });
}

std::string TreasureHunt::render() const {
  constexpr int kCells = 20;
  std::vector<std::string> rows(kCells, std::string(kCells, '.'));
  const auto cell = [](double v) { return std::min(kCells - 1, static_cast<int>(v * kCells)); };
  for (std::size_t i = 0; i < treasures_.size(); ++i)
    rows[cell(treasures_[i].y)][cell(treasures_[i].x)] = found_[i] ? '*' : static_cast<char>('a' + i % 26);
  for (std::size_t i = 0; i < agents_.size(); ++i)
    rows[cell(agents_[i].y)][cell(agents_[i].x)] = static_cast<char>('0' + i % 10);
  std::ostringstream os;
  os << "t=" << t_ << '\n';
  for (const auto& r : rows) os << r << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Predator prey

PredatorPrey::PredatorPrey(EnvSpec spec) : Environment(std::move(spec)) {
  if (spec_.task != Task::kPredatorPrey) throw std::invalid_argument("spec is not predator prey");
}

void PredatorPrey::reset_world() {
  const int d = spec_.grid;
  std::vector<int> cells(d * d);
  for (int i = 0; i < d * d; ++i) cells[i] = i;
  // Partial Fisher-Yates: prey first, then predators, all distinct.
  const int needed = spec_.n_agents + 1;
  for (int i = 0; i < needed; ++i) {
    std::uniform_int_distribution<int> pick(i, d * d - 1);
    std::swap(cells[i], cells[pick(rng_)]);
  }
  prey_ = {cells[0] % d, cells[0] / d};
  predators_.clear();
  for (int i = 1; i < needed; ++i) predators_.push_back({cells[i] % d, cells[i] / d});
  reached_.assign(spec_.n_agents, false);
}

void PredatorPrey::place(std::vector<Cell> predators, Cell prey) {
  if (predators.size() != predators_.size()) throw std::invalid_argument("placement size mismatch");
  predators_ = std::move(predators);
  prey_ = prey;
  for (std::size_t i = 0; i < predators_.size(); ++i) reached_[i] = predators_[i] == prey_;
}

StepResult PredatorPrey::advance(std::span<const int> actions) {
  const int n = spec_.n_agents;
  const int d = spec_.grid;
  StepResult r;
  r.rewards.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (reached_[i]) continue;  // stays on the prey
    Cell& c = predators_[i];
    switch (actions[i]) {
      case kUp: c.y = std::max(0, c.y - 1); break;
      case kDown: c.y = std::min(d - 1, c.y + 1); break;
      case kLeft: c.x = std::max(0, c.x - 1); break;
      case kRight: c.x = std::min(d - 1, c.x + 1); break;
      default: break;
    }
    if (c == prey_) reached_[i] = true;
    else r.rewards[i] = -kStepPenalty;
  }
  r.done = success();
  return r;
}

Observation PredatorPrey::observe(int agent) const {
  const int d = spec_.grid;
  const Cell c = predators_.at(agent);
  Observation o{static_cast<double>(c.x) / (d - 1), static_cast<double>(c.y) / (d - 1),
                reached_[agent] ? 1.0 : 0.0};
  const int v = spec_.vision;
  if (v > 0)
    for (int dy = -v; dy <= v; ++dy)
      for (int dx = -v; dx <= v; ++dx)
        o.push_back(c.x + dx == prey_.x && c.y + dy == prey_.y ? 1.0 : 0.0);
  return o;
}

bool PredatorPrey::success() const {
  return std::all_of(reached_.begin(), reached_.end(), [](bool f) { return f; });
}

std::string PredatorPrey::render() const {
  const int d = spec_.grid;
  std::vector<std::string> rows(d, std::string(d, '.'));
  rows[prey_.y][prey_.x] = 'P';
  for (std::size_t i = 0; i < predators_.size(); ++i)
    if (!reached_[i]) rows[predators_[i].y][predators_[i].x] = static_cast<char>('0' + i % 10);
  std::ostringstream os;
  os << "t=" << t_ << '\n';
  for (const auto& r : rows) os << r << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Traffic junction

TrafficJunction::TrafficJunction(EnvSpec spec) : Environment(std::move(spec)) {
  if (spec_.task != Task::kTrafficJunction) throw std::invalid_argument("spec is not a traffic junction");
}

std::pair<int, int> TrafficJunction::cell_of(const Car& car) const {
  const int mid = spec_.grid / 2;
  return car.route == 0 ? std::pair{car.progress, mid} : std::pair{mid, car.progress};
}

int TrafficJunction::active_count() const {
  return static_cast<int>(std::count_if(cars_.begin(), cars_.end(), [](const Car& c) { return c.active; }));
}

void TrafficJunction::spawn(int slot, int route, int progress) {
  Car& c = cars_.at(slot);
  if (c.active) throw std::logic_error("slot already occupied");
  c = Car{true, route, progress, 0};
}

void TrafficJunction::reset_world() {
  cars_.assign(spec_.n_agents, Car{});
  collided_ = false;
  arrivals();
}

void TrafficJunction::arrivals() {
  std::bernoulli_distribution arrive(spec_.p_arrive);
  for (int route = 0; route < kRoutes; ++route) {
    if (!arrive(rng_)) continue;
    auto free_slot = std::find_if(cars_.begin(), cars_.end(), [](const Car& c) { return !c.active; });
    if (free_slot == cars_.end()) continue;  // at most N cars present
    const bool entry_taken = std::any_of(cars_.begin(), cars_.end(), [route](const Car& c) {
      return c.active && c.route == route && c.progress == 0;
    });
    if (entry_taken) continue;
    *free_slot = Car{true, route, 0, 0};
  }
}

StepResult TrafficJunction::advance(std::span<const int> actions) {
  const int n = spec_.n_agents;
  StepResult r;
  r.rewards.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    Car& c = cars_[i];
    if (!c.active) continue;
    ++c.age;
    r.rewards[i] = -kTimePenalty * c.age;
    if (actions[i] == kGas) ++c.progress;
  }
  for (int i = 0; i < n; ++i)
    if (cars_[i].active && cars_[i].progress >= spec_.grid) cars_[i].active = false;  // left the grid
  for (int i = 0; i < n; ++i) {
    if (!cars_[i].active) continue;
    for (int j = 0; j < n; ++j) {
      if (j == i || !cars_[j].active) continue;
      if (cell_of(cars_[i]) == cell_of(cars_[j])) {
        r.rewards[i] += kCollisionPenalty;
        r.collision = true;
        break;
      }
    }
  }
  collided_ = collided_ || r.collision;
  arrivals();
  r.done = false;
  return r;
}

Observation TrafficJunction::observe(int agent) const {
  const int g = spec_.grid;
  Observation o(g * g + 3, 0.0);
  const Car& c = cars_.at(agent);
  o[g * g + 1] = static_cast<double>(t_) / spec_.t_max;
  if (!c.active) return o;
  const auto [x, y] = cell_of(c);
  o[y * g + x] = 1.0;
  o[g * g] = static_cast<double>(c.route);
  o[g * g + 2] = 1.0;
  return o;
}

std::string TrafficJunction::render() const {
  const int g = spec_.grid;
  const int mid = g / 2;
  std::vector<std::string> rows(g, std::string(g, ' '));
  for (int k = 0; k < g; ++k) rows[mid][k] = rows[k][mid] = '.';
  for (std::size_t i = 0; i < cars_.size(); ++i) {
    if (!cars_[i].active) continue;
    const auto [x, y] = cell_of(cars_[i]);
    rows[y][x] = rows[y][x] == '.' ? static_cast<char>('0' + i % 10) : 'X';
  }
  std::ostringstream os;
  os << "t=" << t_ << (collided_ ? " collided" : "") << '\n';
  for (const auto& r : rows) os << r << '\n';
  return os.str();
}

}  // namespace disem
