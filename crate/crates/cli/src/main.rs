// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(hmfg_cli::run(std::env::args_os()));
}
