#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace disem {

enum class Task { kTreasureHunt, kPredatorPrey, kTrafficJunction };
enum class Setting { kA, kB };

std::string to_string(Task task);
std::string to_string(Setting setting);
std::string short_name(Task task);  // TH / PP / TJ
Task parse_task(const std::string& s);
Setting parse_setting(const std::string& s);

/// Static description of one task/setting pair.
struct EnvSpec {
  Task task = Task::kPredatorPrey;
  Setting setting = Setting::kA;
  int n_agents = 3;
  int t_max = 20;
  double speed = 0.0;           // treasure hunt: distance moved per step
  double collect_radius = 0.0;  // treasure hunt: r_c
  int grid = 0;                 // predator prey: D; traffic junction: side of the grid
  int vision = 0;               // predator prey
  double p_arrive = 0.0;        // traffic junction
  double gamma = 0.99;

  static EnvSpec make(Task task, Setting setting);

  int num_actions() const;
  int obs_dim() const;
  /// True when lower performance values are better (episode length).
  bool lower_is_better() const { return task != Task::kTrafficJunction; }
  std::string label() const;  // e.g. "PP-A"
  void validate() const;
};

using Observation = std::vector<double>;

struct StepResult {
  std::vector<Observation> observations;
  std::vector<double> rewards;
  bool done = false;
  bool collision = false;  // traffic junction: a collision happened this step
};

/// Multi-agent environment with a fixed number of agent slots. In the traffic
/// junction slots are cars that come and go; inactive slots take no actions.
class Environment {
 public:
  explicit Environment(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  int t() const { return t_; }
  bool done() const { return done_; }

  std::vector<Observation> reset(std::uint64_t seed);
  /// One action per agent slot; entries for inactive slots are ignored.
  StepResult step(std::span<const int> actions);

  virtual Observation observe(int agent) const = 0;
  virtual bool active(int /*agent*/) const { return true; }
  /// Task-level outcome once done: all treasures found, all predators on the
  /// prey, or no collision in the junction.
  virtual bool success() const = 0;
  /// Text-grid dump for debugging.
  virtual std::string render() const = 0;

 protected:
  virtual void reset_world() = 0;
  virtual StepResult advance(std::span<const int> actions) = 0;

  std::vector<Observation> observe_all() const;

  EnvSpec spec_;
  std::mt19937_64 rng_;
  int t_ = 0;
  bool done_ = true;
};

std::unique_ptr<Environment> make_environment(const EnvSpec& spec);

/// Agents hunt treasures in the unit square; treasure i is known only to agent
/// i and is collected when some other agent comes within the radius.
class TreasureHunt final : public Environment {
 public:
  static constexpr int kStay = 8;
  static constexpr double kStepPenalty = 0.05;

  explicit TreasureHunt(EnvSpec spec);

  Observation observe(int agent) const override;
  bool success() const override;
  std::string render() const override;

  struct Point {
    double x = 0.0;
    double y = 0.0;
  };
  const std::vector<Point>& agents() const { return agents_; }
  const std::vector<Point>& treasures() const { return treasures_; }
  const std::vector<bool>& found() const { return found_; }
  /// Test hook: place agents and treasures explicitly after reset().
  void place(std::vector<Point> agents, std::vector<Point> treasures);

 protected:
  void reset_world() override;
  StepResult advance(std::span<const int> actions) override;

 private:
  std::vector<Point> agents_;
  std::vector<Point> treasures_;
  std::vector<bool> found_;
};

/// Predators on a D x D grid must all reach a fixed prey.
class PredatorPrey final : public Environment {
 public:
  enum Action { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
  static constexpr double kStepPenalty = 0.05;

  explicit PredatorPrey(EnvSpec spec);

  Observation observe(int agent) const override;
  bool success() const override;
  std::string render() const override;

  struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
  };
  const std::vector<Cell>& predators() const { return predators_; }
  Cell prey() const { return prey_; }
  const std::vector<bool>& reached() const { return reached_; }
  void place(std::vector<Cell> predators, Cell prey);

 protected:
  void reset_world() override;
  StepResult advance(std::span<const int> actions) override;

 private:
  std::vector<Cell> predators_;
  Cell prey_;
  std::vector<bool> reached_;
};

/// Two one-way single-lane roads crossing at the centre of a square grid.
/// Cars arrive at each entry with probability p_arrive, follow a straight
/// route and choose gas or brake each step.
class TrafficJunction final : public Environment {
 public:
  enum Action { kGas = 0, kBrake = 1 };
  static constexpr double kTimePenalty = 0.01;
  static constexpr double kCollisionPenalty = -10.0;
  static constexpr int kRoutes = 2;

  explicit TrafficJunction(EnvSpec spec);

  Observation observe(int agent) const override;
  bool active(int agent) const override { return cars_[agent].active; }
  bool success() const override { return !collided_; }
  std::string render() const override;

  struct Car {
    bool active = false;
    int route = 0;     // 0 = eastbound, 1 = southbound
    int progress = 0;  // cells travelled along the route
    int age = 0;       // steps alive
  };
  const std::vector<Car>& cars() const { return cars_; }
  int active_count() const;
  bool collided() const { return collided_; }
  std::pair<int, int> cell_of(const Car& car) const;
  /// Test hook: install a car in a free slot.
  void spawn(int slot, int route, int progress);

 protected:
  void reset_world() override;
  StepResult advance(std::span<const int> actions) override;

 private:
  void arrivals();

  std::vector<Car> cars_;
  bool collided_ = false;
};

}  // namespace disem
