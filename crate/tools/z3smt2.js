#!/usr/bin/env node
// Run an SMT-LIB2 script through the z3-solver WebAssembly build and print
// the solver output on stdout. Used as the default solver backend when no
// native `z3` binary is on PATH:
//
//   node tools/z3smt2.js FILE.smt2 [TIMEOUT_MS]
//
// Requires `npm install` in this directory (pulls z3-solver).
const fs = require('fs');

async function main() {
  const file = process.argv[2];
  if (!file) {
    console.error('usage: z3smt2.js FILE.smt2 [TIMEOUT_MS]');
    process.exit(2);
  }
  const script = fs.readFileSync(file, 'utf8');
  const { init } = require('z3-solver');
  const { Z3 } = await init();
  const timeoutMs = process.argv[3];
  if (timeoutMs && Number(timeoutMs) > 0) {
    Z3.global_param_set('timeout', String(Math.floor(Number(timeoutMs))));
  }
  const ctx = Z3.mk_context(Z3.mk_config());
  const out = await Z3.eval_smtlib2_string(ctx, script);
  process.stdout.write(out);
  // The WASM runtime keeps worker threads alive; exit explicitly.
  process.exit(0);
}

main().catch(err => {
  console.error(String((err && err.message) || err));
  process.exit(1);
});
