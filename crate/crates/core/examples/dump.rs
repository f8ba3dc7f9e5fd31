fn main() {
    let path = std::env::args().nth(1).unwrap();
    let m = rvsdg::source::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let g = rvsdg::construct::construct(&m).unwrap().graph;
    print!("{}", rvsdg::graph::dump::dump(&g));
}
