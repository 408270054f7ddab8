#include "fieldpod/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fieldpod/error.hpp"
#include "fieldpod/net.hpp"

namespace fieldpod {

namespace {

constexpr Duration kMaxWait = std::chrono::milliseconds(20);

std::chrono::seconds whole_seconds(double s) {
  return std::chrono::seconds(std::max<std::int64_t>(1, std::llround(s)));
}

}  // namespace

DeviceRunner::DeviceRunner(RunnerOptions options, const Clock& clock)
    : options_(std::move(options)),
      clock_(clock),
      catalog_(Catalog::load_or_seed(options_.data_dir)),
      data_store_(options_.data_dir) {
  const auto& sc = options_.scenario;
  sc.settings.validate();
  portal_ = std::make_unique<ConfigPortal>(catalog_, SimulatedWifi(sc.networks), data_store_);
  if (sc.sensor_mode == SensorMode::Replay) {
    stream_ = load_replay_csv(sc.replay_csv);
  } else {
    feed_.emplace(SimulatedSource::farming_defaults(sc.seed), sc.settings.sample_period_s);
  }
}

DeviceRunner::~DeviceRunner() {
  if (server_) server_->stop();
  queue_.close();
}

std::optional<Instant> DeviceRunner::boot_time() const {
  std::lock_guard lock(journal_mu_);
  return boot_time_;
}

std::vector<TelemetryRecord> DeviceRunner::journal() const {
  std::lock_guard lock(journal_mu_);
  return journal_;
}

std::vector<std::string> DeviceRunner::pump_history() const {
  std::lock_guard lock(journal_mu_);
  return pump_history_;
}

UtcTime DeviceRunner::sim_utc_at(double sim_s) const {
  return options_.scenario.start_utc + std::chrono::seconds(static_cast<std::int64_t>(std::floor(sim_s)));
}

UtcTime DeviceRunner::sim_utc(Instant now) const { return sim_utc_at(state_.sim_seconds(now)); }

RunReport DeviceRunner::run() {
  const auto& sc = options_.scenario;
  std::filesystem::create_directories(options_.data_dir);
  {
    const auto now = clock_.now();
    state_ = boot(sc.settings, now, &data_store_);
    std::lock_guard lock(journal_mu_);
    boot_time_ = state_.boot_time;
  }
  started_ = true;
  spdlog::info("device {} booted; config window {} s (x{} speed-up)", sc.settings.device_id,
               sc.settings.config_window_s, sc.settings.time_scale);

  if (sc.application) {
    try {
      submit_application(*sc.application);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Storage) {
        fault(e.what());
      } else {
        throw;
      }
    }
  }

  if (options_.portal_port && !state_.faulted()) {
    server_ = std::make_unique<PortalServer>(
        *this, queue_, hub_, PortalServer::Options{options_.portal_host, *options_.portal_port, options_.web_root});
    server_->start();
    portal_port_ = server_->port();
  }

  while (!state_.faulted() && !stop_requested_) {
    const auto now = clock_.now();
    advance(now);
    queue_.run_pending();
    if (state_.faulted() || done(now)) break;
    const auto wait = std::clamp(next_due(now) - clock_.now(), Duration::zero(), kMaxWait);
    queue_.wait_for(wait);
  }

  if (publisher_ && !state_.faulted()) {
    current_sim_ = state_.sim_seconds(clock_.now());
    try {
      report_.drained += publisher_->flush();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Storage) throw;
      fault(e.what());
    }
  }
  if (server_) server_->stop();
  queue_.close();
  hub_.close();
  if (session_) session_->disconnect();

  report_.final_phase = std::string(phase_name(state_.phase));
  if (const auto* f = std::get_if<phase::Fault>(&state_.phase)) {
    report_.fault_reason = f->reason;
    report_.exit_code = 1;
  }
  report_.backlog_left = backlog_ ? backlog_->size() : 0;
  return report_;
}

void DeviceRunner::advance(Instant now) {
  // Several transitions can be due at once (window closes, setup, first sample).
  for (int guard = 0; guard < 4 && !state_.faulted(); ++guard) {
    auto result = tick(state_, now, committed_);
    state_ = result.state;
    if (result.effects.empty()) break;
    for (const auto& e : result.effects) {
      if (state_.faulted()) break;
      execute(e, now);
    }
  }
}

bool DeviceRunner::done(Instant now) const {
  if (options_.max_samples && report_.samples >= *options_.max_samples) return true;
  const auto& duration = options_.scenario.duration_s;
  if (!duration) return false;
  if (!state_.operational()) return state_.sim_seconds(now) >= *duration;
  // Stop once the boundary at the duration mark has been sampled.
  const auto* op = std::get_if<phase::Operational>(&state_.phase);
  const double next_sim = static_cast<double>(op->next_boundary) * state_.sample_period_s;
  return next_sim > *duration + 1e-9 && state_.sim_seconds(now) >= *duration;
}

Instant DeviceRunner::next_due(Instant now) const {
  if (const auto* c = std::get_if<phase::ConfigMode>(&state_.phase)) return c->deadline;
  if (const auto* op = std::get_if<phase::Operational>(&state_.phase)) {
    return state_.boundary_instant(op->next_boundary);
  }
  return now;
}

void DeviceRunner::execute(const Effect& effect, Instant now) {
  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, effect::DisablePortalConfig>) {
          ++report_.portal_disabled;
          spdlog::info("config window closed; portal is read-only from now on");
        } else if constexpr (std::is_same_v<E, effect::RunOneTimeSetup>) {
          ++report_.setups;
          one_time_setup(e.inputs_committed, now);
        } else {
          ++report_.samples;
          sample_sensors(e);
        }
      },
      effect);
}

void DeviceRunner::fault(const std::string& reason) { state_ = enter_fault(state_, reason); }

void DeviceRunner::one_time_setup(bool inputs_committed, Instant now) {
  const auto& sc = options_.scenario;
  const auto& settings = sc.settings;
  if (!inputs_committed && !state_.application) {
    spdlog::warn("no application input; running without an irrigation plan");
  }
  try {
    backlog_ = std::make_unique<BacklogStore>(options_.data_dir);
  } catch (const Error& e) {
    fault(fmt::format("cannot open telemetry backlog: {}", e.what()));
    return;
  }
  if (backlog_->size() > 0) spdlog::info("telemetry backlog holds {} undelivered records", backlog_->size());

  // Keep a dead broker from stalling the loop for longer than a fraction of a period.
  const auto period_wall = seconds_f(settings.sample_period_s / settings.time_scale);
  const auto io_timeout =
      std::clamp<Duration>(period_wall / 4, std::chrono::milliseconds(50), std::chrono::seconds(2));
  MqttOptions mqtt_options;
  mqtt_options.address = net::HostPort::parse(settings.broker_address);
  mqtt_options.client_id = settings.device_id;
  mqtt_options.connect_timeout = io_timeout;
  mqtt_options.io_timeout = io_timeout;
  mqtt_ = std::make_unique<MqttSession>(mqtt_options);
  session_ = std::make_unique<FaultInjectingSession>(
      *mqtt_, [this] { return options_.scenario.broker_down_at(current_sim_); });

  TelemetryPublisher::Options pub_options;
  pub_options.topic_prefix = settings.topic_prefix;
  publisher_ = std::make_unique<TelemetryPublisher>(*backlog_, *session_, clock_, pub_options);
  publisher_->on_record([this](const TelemetryRecord& r) {
    std::lock_guard lock(journal_mu_);
    journal_.push_back(r);
  });
  publisher_->on_connect([this] {
    spdlog::info("connected to broker {}", options_.scenario.settings.broker_address);
    try {
      session_->subscribe(pump_command_topic(options_.scenario.settings.topic_prefix).str());
    } catch (const Error& e) {
      spdlog::warn("pump command subscription failed: {}", e.what());
    }
    status_dirty_ = true;
  });

  DecisionPolicy policy;
  if (sc.policy) {
    policy = *sc.policy;
  } else if (state_.application) {
    policy = DecisionPolicy::from_soil(catalog_.soil(state_.application->soil_name),
                                       catalog_.crop(state_.application->crop_name));
  }
  pump_ = std::make_unique<PumpController>(policy, whole_seconds(settings.sample_period_s), sim_utc(now),
                                           whole_seconds(sc.manual_ttl_s));
  status_dirty_ = true;
  spdlog::info("pump thresholds: on below {:.1f} %, off at {:.1f} %", policy.sm_low, policy.sm_high);

  build_plan();
}

void DeviceRunner::build_plan() {
  const auto& sc = options_.scenario;
  if (!sc.site || !state_.application) return;
  const auto& app = *state_.application;
  try {
    weather_ = load_weather_csv(sc.site->weather_csv);
    plan_ = simulate_balance(app, catalog_.crop(app.crop_name), catalog_.soil(app.soil_name), weather_,
                             sc.site->latitude_deg * std::numbers::pi / 180.0, sc.site->efficiency);
  } catch (const Error& e) {
    spdlog::warn("irrigation plan unavailable: {} ({})", e.what(), to_string(e.code()));
    return;
  }
  spdlog::info("irrigation plan: {} events, TAW {:.1f} mm, RAW {:.1f} mm", plan_->events.size(), plan_->taw_mm,
               plan_->raw_mm);
  write_plan_files();
}

void DeviceRunner::write_plan_files() {
  if (!plan_) return;
  auto write = [&](std::string_view name, const std::string& body) {
    const auto path = options_.data_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) spdlog::warn("cannot write {}", path.string());
  };
  write(kStageCsv, stage_table_csv(plan_->stage_plan));
  write(kEventCsv, event_table_csv(plan_->events));
}

void DeviceRunner::replan(const SensorReading& sm) {
  if (!plan_ || !state_.application) return;
  const Date today = date_of(sm.timestamp);
  if (last_replan_ == today) return;
  last_replan_ = today;
  const auto& app = *state_.application;
  const auto& crop = catalog_.crop(app.crop_name);
  const auto& soil = catalog_.soil(app.soil_name);
  try {
    IrrigationPlan base = *plan_;
    if (!observed_.days().empty()) {
      // Re-derive demand with the temperatures seen so far, then pin today's depletion.
      const auto& site = *options_.scenario.site;
      base = simulate_balance(app, crop, soil, fold_observed(weather_, observed_),
                              site.latitude_deg * std::numbers::pi / 180.0, site.efficiency);
    }
    plan_ = update_with_observation(base, sm, today, soil, crop);
  } catch (const Error& e) {
    // Range: today is outside the season.
    if (e.code() != ErrorCode::Range) spdlog::warn("replanning skipped: {}", e.what());
    return;
  }
  write_plan_files();
}

void DeviceRunner::sample_sensors(const effect::SampleSensors& s) {
  const auto& sc = options_.scenario;
  current_sim_ = s.sim_time;
  if (sc.storage_fail_after_s && s.sim_time >= *sc.storage_fail_after_s) {
    backlog_->set_write_failure(true);
    data_store_.set_write_failure(true);
  }

  auto readings = feed_ ? feed_->sample(s.sim_time, sc.start_utc, sc.settings.device_id)
                        : fieldpod::sample(stream_, s.sim_time, sc.start_utc, sc.settings.device_id);
  std::erase_if(readings, [](const SensorReading& r) {
    if (in_range(r)) return false;
    spdlog::warn("dropping out-of-range {} reading {}", spec_of(r.kind).code, r.value);
    return true;
  });

  try {
    const auto outcome = publisher_->submit(readings);
    report_.published_live += outcome.live;
    report_.drained += outcome.drained;
    report_.backlogged += outcome.backlogged;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Storage) throw;
    fault(e.what());
    return;
  }

  std::optional<SensorReading> sm;
  for (const auto& r : readings) {
    StreamEvent ev{topic_for(r.kind, sc.settings.topic_prefix).str(), encode_payload(r), format_utc(r.timestamp)};
    latest_[ev.topic] = ev;
    hub_.publish(ev);
    if (r.kind == SensorKind::SoilMoisture) sm = r;
    if (r.kind == SensorKind::Temperature) observed_.add(r);
  }

  const auto now = sim_utc_at(s.sim_time);
  service_inbound(now);
  const auto step = pump_->on_sample(sm ? std::optional(sm->value) : std::nullopt, now);
  if (step.changed) {
    spdlog::info("pump {} ({})", pump_->relay().pump_on ? "on" : "off", to_string(pump_->relay().last_source));
    status_dirty_ = true;
  }
  publish_pump_status();
  if (sm) replan(*sm);
}

void DeviceRunner::service_inbound(UtcTime now) {
  if (!session_->connected()) return;
  std::vector<InboundMessage> inbound;
  try {
    inbound = session_->poll();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Transport) throw;
    return;
  }
  const auto cmd_topic = pump_command_topic(options_.scenario.settings.topic_prefix).str();
  for (const auto& msg : inbound) {
    if (msg.topic != cmd_topic) continue;
    const auto action = parse_pump_payload(msg.payload);
    if (!action) {
      spdlog::warn("ignoring pump command '{}'", msg.payload);
      continue;
    }
    if (pump_->on_manual(*action, now).changed) status_dirty_ = true;
  }
}

void DeviceRunner::publish_pump_status() {
  if (!status_dirty_ || !pump_) return;
  const std::string payload(pump_->relay().pump_on ? "on" : "off");
  const auto topic = pump_status_topic(options_.scenario.settings.topic_prefix).str();
  {
    std::lock_guard lock(journal_mu_);
    if (pump_history_.empty() || pump_history_.back() != payload) pump_history_.push_back(payload);
  }
  StreamEvent ev{topic, payload, format_utc(sim_utc_at(current_sim_))};
  latest_[topic] = ev;
  hub_.publish(ev);
  if (!session_ || !session_->connected()) return;  // republished by on_connect
  try {
    session_->publish(topic, payload, 1, true);
    status_dirty_ = false;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Transport) throw;
  }
}

StateSnapshot DeviceRunner::snapshot() {
  const auto now = clock_.now();
  StateSnapshot s;
  s.phase = std::string(phase_name(state_.phase));
  if (const auto* c = std::get_if<phase::ConfigMode>(&state_.phase)) {
    s.countdown_s = std::max(0.0, to_seconds(c->deadline - now));
  }
  if (const auto* f = std::get_if<phase::Fault>(&state_.phase)) s.fault_reason = f->reason;
  s.sim_time_s = started_ ? state_.sim_seconds(now) : 0;
  s.sample_period_s = state_.sample_period_s;
  s.application = state_.application;
  if (pump_) {
    s.pump_on = pump_->relay().pump_on;
    s.pump_source = std::string(to_string(pump_->relay().last_source));
  } else {
    s.pump_source = std::string(to_string(CommandSource::Auto));
  }
  for (const auto& [topic, ev] : latest_) s.latest.push_back(ev);
  return s;
}

void DeviceRunner::apply_network(const NetworkConfig& config) {
  try {
    portal_->apply_network(state_, config);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Storage) fault(e.what());
    throw;
  }
}

void DeviceRunner::submit_application(const ApplicationInput& input) {
  try {
    state_ = portal_->submit_application(state_, input);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Storage) fault(e.what());
    throw;
  }
  committed_ = true;
}

RelayState DeviceRunner::manual_pump(PumpAction action) {
  if (!state_.operational() || !pump_) {
    throw Error(ErrorCode::Precondition,
                fmt::format("pump control needs an operational device (phase {})", phase_name(state_.phase)));
  }
  if (pump_->on_manual(action, sim_utc(clock_.now())).changed) {
    status_dirty_ = true;
    publish_pump_status();
  }
  return pump_->relay();
}

}  // namespace fieldpod
