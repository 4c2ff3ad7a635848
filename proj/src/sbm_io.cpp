#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "blockcons/error.hpp"
#include "blockcons/sbm.hpp"
#include "json.hpp"

namespace blockcons::sbm {

void write_edge_list(const Network& net, std::ostream& out) {
    out << net.num_nodes() << ' ' << net.num_blocks();
    for (int s : net.community_sizes()) out << ' ' << s;
    out << '\n';
    for (const auto& [i, j] : net.edges()) out << i << ' ' << j << '\n';
}

Network read_edge_list(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") != std::string::npos) break;
    }
    std::istringstream header(line);
    int n = 0, k = 0;
    if (!(header >> n >> k) || n < 0 || k < 0) throw ParseError("bad edge-list header", lineno);
    std::vector<int> sizes(k);
    for (int& s : sizes)
        if (!(header >> s)) throw ParseError("header lists fewer sizes than K", lineno);

    std::vector<Edge> edges;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream row(line);
        long long a = -1, b = -1;
        if (!(row >> a >> b) || a < 0 || b < 0) throw ParseError("expected 'i j'", lineno);
        edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
    }
    return Network::from_edges(n, edges, std::move(sizes));
}

std::string to_json(const Network& net) {
    nlohmann::json j;
    j["n"] = net.num_nodes();
    j["K"] = net.num_blocks();
    j["sizes"] = net.community_sizes();
    j["membership"] = net.membership();
    j["seed"] = net.seed();
    auto& edges = j["edges"] = nlohmann::json::array();
    for (const auto& [a, b] : net.edges()) edges.push_back({a, b});
    return j.dump();
}

Network network_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
    auto sizes = j.at("sizes").get<std::vector<int>>();
    Network net = Network::from_edges(j.at("n").get<int>(), edges, std::move(sizes),
                                      j.value("seed", std::uint64_t{0}));
    if (j.contains("membership") && j["membership"].get<std::vector<int>>() != net.membership())
        throw InvalidArgument("membership does not match block-ordered sizes");
    return net;
}

}  // namespace blockcons::sbm
