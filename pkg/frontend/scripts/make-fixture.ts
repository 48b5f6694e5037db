/**
 * Regenerates the committed scripted-session fixtures:
 *   fixtures/manifest_3back.json  -- 3-back trial, 64 answered scored epochs,
 *                                    19 wrong (29.6875% mistakes)
 *   fixtures/sync_log_3back.json  -- the matching 68 sync events
 *
 * The primary pipeline's test suite parses these files to prove the export
 * round-trips through its ingest module.
 */

import { mkdirSync, writeFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { scripted3BackSession } from '../src/script3back.js';

const here = dirname(fileURLToPath(import.meta.url));
const fixtures = join(here, '..', '..', 'fixtures');
mkdirSync(fixtures, { recursive: true });

const session = scripted3BackSession();
writeFileSync(join(fixtures, 'manifest_3back.json'),
              JSON.stringify(session.manifest, null, 2) + '\n');
writeFileSync(join(fixtures, 'sync_log_3back.json'),
              JSON.stringify(session.syncLog, null, 2) + '\n');

const { answers, truth_counts } = session.manifest;
let scored = 0;
let wrong = 0;
answers.forEach((answer, i) => {
  if (i < 3 || answer === null) {
    return;
  }
  scored += 1;
  if (answer !== truth_counts[i - 3]) {
    wrong += 1;
  }
});
console.log(`fixture: ${scored} scored epochs, ${wrong} wrong ` +
            `(${((100 * wrong) / scored).toFixed(4)}%)`);
