// Finds the smallest seed for which select_monitors puts the requested probe
// source first, then writes <dir>/<name>.monitors.
#include <cstdlib>
#include <iostream>
#include <string>

#include "securent/text.hpp"
#include "securent/topology.hpp"

int main(int argc, char** argv) {
  if (argc != 5) {
    std::cerr << "usage: monitor_sweep <fixture-dir> <name> <count> <source>\n";
    return 2;
  }
  const std::string dir = argv[1];
  const std::string name = argv[2];
  const auto count = static_cast<std::size_t>(std::stoul(argv[3]));
  const std::string source = argv[4];
  const auto topology = securent::load_graphml_file(dir + "/" + name + ".graphml");
  for (securent::Seed seed = 0; seed < 1'000'000; ++seed) {
    auto monitors = securent::select_monitors(topology, count, seed);
    if (monitors.front() != source) continue;
    const auto network =
        securent::make_network(topology.with_monitors(monitors), securent::ProbeMode::single_source);
    securent::MonitorFixture f{name, securent::ProbeMode::single_source, count, seed, monitors};
    securent::text::write_file(dir + "/" + name + ".monitors", f.to_text());
    const auto s = securent::summarize(network.topology, network.paths);
    std::cout << name << " seed=" << seed << " paths=" << s.paths << " links=" << s.links
              << " mean_hops=" << s.mean_hops << " mean_weight=" << s.mean_weight << '\n';
    return 0;
  }
  std::cerr << "no seed found\n";
  return 1;
}
