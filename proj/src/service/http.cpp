#include "iplan/service/http.hpp"

#include "iplan/core/layout_io.hpp"

#include <httplib.h>

namespace iplan::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req)
{
    if (req.body.empty())
        return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw ParseError(std::string("request body: ") + e.what());
    }
}

SessionSpec spec_from_request(const json& body, const RoomTypeRegistry& reg)
{
    if (!body.contains("layout"))
        return SessionSpec::from_json(body, reg);
    const Layout layout = layout_from_json(body["layout"]);
    if (!(layout.registry == reg))
        throw RegistryError("layout registry differs from the loaded models");
    try {
        SessionSpec spec = spec_from_layout(layout, variant_from_string(body.value("variant", std::string("auto"))),
            body.value("seed", std::uint64_t{0}));
        spec.id = body.value("id", std::string());
        json extra = body;
        extra["boundary"] = boundary_to_json(layout.boundary);
        const SessionSpec explicit_inputs = SessionSpec::from_json(extra, reg);
        if (explicit_inputs.types)
            spec.types = explicit_inputs.types;
        if (explicit_inputs.centers)
            spec.centers = explicit_inputs.centers;
        return spec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("session request: ") + e.what());
    }
}

// Wraps a handler so library errors become JSON error responses.
template <typename F>
httplib::Server::Handler guarded(F f)
{
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_json(res, {{"error", e.kind()}, {"message", e.detail()}}, http_status(e.kind()));
        } catch (const std::exception& e) {
            send_json(res, {{"error", "InternalError"}, {"message", e.what()}}, 500);
        }
    };
}

} // namespace

int http_status(const std::string& kind)
{
    if (kind == "NotFound")
        return 404;
    if (kind == "EditError")
        return 409;
    if (kind == "NoFreeSpace")
        return 422;
    if (kind == "ParseError" || kind == "ValidationError" || kind == "VariantError" || kind == "RegistryError"
        || kind == "DomainError" || kind == "ShapeError")
        return 400;
    return 500;
}

struct HttpService::Impl {
    explicit Impl(SessionStore& s) : store(s) {}
    SessionStore& store;
    httplib::Server server;
};

HttpService::HttpService(SessionStore& store) : impl_(std::make_unique<Impl>(store))
{
    httplib::Server& srv = impl_->server;
    SessionStore& st = impl_->store;
    const RoomTypeRegistry& reg = st.models().registry;

    srv.Post("/sessions", guarded([&st, &reg](const httplib::Request& req, httplib::Response& res) {
        const std::string id = st.create(spec_from_request(parse_body(req), reg));
        send_json(res, {{"id", id}, {"state", st.with(id, [](Session& s) { return s.view(); })}}, 201);
    }));
    srv.Post(R"(/sessions/([^/]+)/step)", guarded([&st, &reg](const httplib::Request& req, httplib::Response& res) {
        send_json(res, st.with(req.matches[1], [&](Session& s) { return s.step().to_json(reg); }));
    }));
    srv.Post(R"(/sessions/([^/]+)/edit)", guarded([&st, &reg](const httplib::Request& req, httplib::Response& res) {
        const EditOp op = EditOp::from_json(parse_body(req), reg);
        send_json(res, st.with(req.matches[1], [&](Session& s) { return s.edit(op).to_json(reg); }));
    }));
    srv.Get(R"(/sessions/([^/]+)/state)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        send_json(res, st.with(req.matches[1], [](Session& s) { return s.view(); }));
    }));
    srv.Get(R"(/sessions/([^/]+)/log)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        send_json(res, st.with(req.matches[1], [](Session& s) { return json(s.log()); }));
    }));
    srv.Get(R"(/sessions/([^/]+)/render)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto png = st.with(req.matches[1], [](Session& s) { return encode_png(s.render()); });
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));
    srv.Get("/sessions", guarded([&st](const httplib::Request&, httplib::Response& res) {
        send_json(res, {{"sessions", st.ids()}});
    }));
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port)
{
    if (port == 0)
        port = impl_->server.bind_to_any_port(host);
    else if (!impl_->server.bind_to_port(host, port))
        port = -1;
    if (port < 0)
        throw Error("IoError", "cannot bind " + host);
    return port;
}

void HttpService::serve() { impl_->server.listen_after_bind(); }

void HttpService::stop()
{
    if (impl_)
        impl_->server.stop();
}

} // namespace iplan::service
