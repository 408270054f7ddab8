#include "fieldpod/portal_server.hpp"

#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "fieldpod/error.hpp"

namespace fieldpod {

using nlohmann::json;

namespace {

constexpr const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>fieldpod</title></head>
<body>
<h1>fieldpod</h1>
<p>The web UI is not installed. Start the device with <code>--web-root</code> to serve it,
or use the JSON API under <code>/api/</code>.</p>
</body></html>
)";

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ModeViolation:
      return 403;
    case ErrorCode::Precondition:
      return 403;
    case ErrorCode::Validation:
    case ErrorCode::Range:
      return 422;
    case ErrorCode::Parse:
      return 400;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::Transport:
      return 503;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view detail,
                std::string_view field = {}) {
  json body{{"error", code}, {"detail", detail}};
  if (!field.empty()) body["field"] = field;
  send_json(res, body, status);
}

json network_json(const NetworkInfo& n) {
  return json{{"ssid", n.ssid}, {"rssi_dbm", n.rssi_dbm}, {"security", to_string(n.security)},
              {"connected", n.connected}};
}

json application_json(const ApplicationInput& a) {
  return json{{"crop", a.crop_name},
              {"soil", a.soil_name},
              {"plant_date", a.plant_date.iso()},
              {"area_m2", a.area_m2},
              {"flow_lph", a.flow_lph}};
}

json relay_json(const RelayState& relay) {
  return json{{"on", relay.pump_on}, {"source", to_string(relay.last_source)}, {"since", format_utc(relay.since)}};
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw Error(ErrorCode::Parse, "request body must be a JSON object");
  }
  return body;
}

std::string require_string(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) {
    throw Error(ErrorCode::Validation, fmt::format("'{}' must be a string", key), key);
  }
  return body[key].get<std::string>();
}

double require_number(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_number()) {
    throw Error(ErrorCode::Validation, fmt::format("'{}' must be a number", key), key);
  }
  return body[key].get<double>();
}

ApplicationInput application_from(const json& body) {
  ApplicationInput input;
  input.crop_name = require_string(body, "crop");
  input.soil_name = require_string(body, "soil");
  const auto date = require_string(body, "plant_date");
  try {
    input.plant_date = Date::parse(date);
  } catch (const Error& e) {
    throw Error(ErrorCode::Validation, e.what(), "plant_date");
  }
  input.area_m2 = require_number(body, "area_m2");
  input.flow_lph = require_number(body, "flow_lph");
  return input;
}

}  // namespace

struct PortalServer::Impl {
  PortalHost& host;
  ControlQueue& queue;
  EventHub& hub;
  Options options;
  httplib::Server server;
  std::thread thread;

  Impl(PortalHost& h, ControlQueue& q, EventHub& e, Options o)
      : host(h), queue(q), hub(e), options(std::move(o)) {}

  // Wraps a handler so project errors become the standard error body.
  template <typename F>
  httplib::Server::Handler guarded(F fn, std::string_view mode_code = "config_window_closed") {
    return [this, fn, mode_code](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        std::string_view code = to_string(e.code());
        if (e.code() == ErrorCode::ModeViolation || e.code() == ErrorCode::Precondition) code = mode_code;
        send_error(res, status_for(e.code()), code, e.what(), e.field());
      } catch (const std::exception& e) {
        spdlog::error("portal: {} {} failed: {}", req.method, req.path, e.what());
        send_error(res, 500, "internal_error", e.what());
      }
    };
  }

  template <typename F>
  auto on_loop(F fn) {
    return queue.call(std::move(fn), options.call_timeout);
  }

  void routes() {
    server.Get("/api/networks", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto nets = on_loop([this] { return host.portal().list_networks(); });
      json out = json::array();
      for (const auto& n : nets) out.push_back(network_json(n));
      send_json(res, out);
    }));

    server.Post("/api/network", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      NetworkConfig config{require_string(body, "ssid"), {}};
      if (body.contains("passphrase")) {
        if (!body["passphrase"].is_string()) {
          throw Error(ErrorCode::Validation, "'passphrase' must be a string", "passphrase");
        }
        config.passphrase = body["passphrase"].get<std::string>();
      }
      auto status = on_loop([this, config] {
        host.apply_network(config);
        return host.portal().network_info();
      });
      json out{{"ok", true}, {"connected", status.connected ? network_json(*status.connected) : json(nullptr)}};
      send_json(res, out);
    }));

    server.Get("/api/network/info", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto status = on_loop([this] { return host.portal().network_info(); });
      json neighbors = json::array();
      for (const auto& n : status.neighbors) neighbors.push_back(network_json(n));
      send_json(res, json{{"connected", status.connected ? network_json(*status.connected) : json(nullptr)},
                          {"neighbors", neighbors}});
    }));

    server.Get("/api/application/options", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto [crops, soils] = on_loop([this] {
        return std::pair{host.portal().crop_options(), host.portal().soil_options()};
      });
      send_json(res, json{{"crops", crops}, {"soils", soils}});
    }));

    server.Post("/api/application", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto input = application_from(parse_body(req));
      on_loop([this, input] { host.submit_application(input); });
      send_json(res, json{{"ok", true}, {"application", application_json(input)}});
    }));

    server.Get("/api/state", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto s = on_loop([this] { return host.snapshot(); });
      json latest = json::array();
      for (const auto& ev : s.latest) latest.push_back(json::parse(to_json(ev)));
      json out{{"phase", s.phase},
               {"countdown_s", s.countdown_s ? json(*s.countdown_s) : json(nullptr)},
               {"config_open", s.phase == "config_mode"},
               {"sim_time_s", s.sim_time_s},
               {"sample_period_s", s.sample_period_s},
               {"application", s.application ? application_json(*s.application) : json(nullptr)},
               {"pump", json{{"on", s.pump_on}, {"source", s.pump_source}}},
               {"latest", latest}};
      if (s.fault_reason) out["fault"] = *s.fault_reason;
      send_json(res, out);
    }));

    server.Post("/api/pump", guarded(
                                 [this](const httplib::Request& req, httplib::Response& res) {
                                   const auto body = parse_body(req);
                                   const auto parsed = parse_pump_payload(require_string(body, "action"));
                                   if (!parsed) {
                                     throw Error(ErrorCode::Validation, "'action' must be \"on\" or \"off\"",
                                                 "action");
                                   }
                                   const PumpAction action = *parsed;
                                   const auto relay = on_loop([this, action] { return host.manual_pump(action); });
                                   send_json(res, json{{"ok", true}, {"pump", relay_json(relay)}});
                                 },
                                 "not_operational"));

    server.Get("/api/stream", [this](const httplib::Request&, httplib::Response& res) {
      auto sub = hub.subscribe();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [sub](std::size_t, httplib::DataSink& sink) {
        if (!sink.is_writable()) return false;
        if (auto ev = sub->next(std::chrono::milliseconds(500))) {
          const auto frame = fmt::format("event: update\ndata: {}\n\n", to_json(*ev));
          return sink.write(frame.data(), frame.size());
        }
        if (sub->closed()) {
          sink.done();
          return true;
        }
        static constexpr char kKeepAlive[] = ": keepalive\n\n";
        return sink.write(kKeepAlive, sizeof(kKeepAlive) - 1);
      });
    });

    if (options.web_root) {
      if (!server.set_mount_point("/", options.web_root->string())) {
        throw Error(ErrorCode::Configuration,
                    fmt::format("web root {} is not a directory", options.web_root->string()), "web_root");
      }
    } else {
      server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
      });
    }
  }
};

PortalServer::PortalServer(PortalHost& host, ControlQueue& queue, EventHub& hub, Options options)
    : impl_(std::make_unique<Impl>(host, queue, hub, std::move(options))) {}

PortalServer::~PortalServer() { stop(); }

void PortalServer::start() {
  impl_->routes();
  auto& o = impl_->options;
  if (o.port == 0) {
    port_ = impl_->server.bind_to_any_port(o.host);
  } else {
    port_ = impl_->server.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::Configuration, fmt::format("cannot bind portal to {}:{}", o.host, o.port), "port");
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  spdlog::info("portal: listening on {}:{}", o.host, port_);
}

void PortalServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  impl_->hub.close();
  impl_->server.stop();
  impl_->thread.join();
}

}  // namespace fieldpod
