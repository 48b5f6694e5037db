/** DOM shell around the trial runner: digit display, keyboard capture,
 * calibration badge, rest screen, and manifest/sync-log downloads. */

import { TrialRunner } from './runner.js';
import { NbackLevel, SessionExport, Trial } from './trial.js';

const el = (id: string) => document.getElementById(id) as HTMLElement;

const clock = { now: () => performance.now() };
const host = {
  setTimeout: (fn: () => void, ms: number) => window.setTimeout(fn, ms),
  clearTimeout: (h: unknown) => window.clearTimeout(h as number),
};

let runner: TrialRunner | null = null;
let lastExport: SessionExport | null = null;

function render(trial: Trial): void {
  el('digits').textContent = trial.digits.join('  ');
  el('epoch').textContent =
    `epoch ${trial.epochIndex + 1} / ${trial.totalEpochs}`;
  el('calibration-badge').style.display =
    trial.isCalibrationEpoch ? 'inline-block' : 'none';
  el('answer-state').textContent = 'no answer yet';
}

function postSync(endpoint: string, epochIndex: number, atMs: number): void {
  void fetch(endpoint, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({ epoch_index: epochIndex, at_ms: atMs }),
  }).catch(() => undefined);
}

function download(name: string, payload: unknown): void {
  const blob = new Blob([JSON.stringify(payload, null, 2) + '\n'],
                        { type: 'application/json' });
  const url = URL.createObjectURL(blob);
  const a = document.createElement('a');
  a.href = url;
  a.download = name;
  a.click();
  URL.revokeObjectURL(url);
}

function start(level: NbackLevel): void {
  const subject = (el('subject') as HTMLInputElement).value || 'S00';
  const endpoint = (el('sync-endpoint') as HTMLInputElement).value.trim();
  runner?.abort();
  lastExport = null;
  el('rest-screen').style.display = 'none';
  el('trial-screen').style.display = 'block';
  runner = new TrialRunner(
    { subjectId: subject, nbackLevel: level },
    host, clock,
    {
      onEpoch: render,
      onSync: endpoint
        ? (i, at) => postSync(endpoint, i, at)
        : undefined,
      onDone: (trial) => {
        lastExport = trial.exportSession();
        el('trial-screen').style.display = 'none';
        el('rest-screen').style.display = 'block';
        el('rest-message').textContent =
          `${level}-back finished. Rest 5-10 minutes before the next trial.`;
        (el('download-manifest') as HTMLButtonElement).disabled = false;
        (el('download-sync') as HTMLButtonElement).disabled = false;
      },
    },
  );
  runner.start();
}

document.addEventListener('keydown', (event) => {
  if (!runner) {
    return;
  }
  const key = Number(event.key);
  if (Number.isInteger(key) && runner.recordAnswer(key, performance.now())) {
    el('answer-state').textContent = `answered: ${event.key}`;
  } else if (/^[0-9]$/.test(event.key)) {
    el('answer-state').textContent = `${event.key} rejected (0-4 only)`;
  }
});

for (const level of [0, 1, 2, 3] as const) {
  el(`start-${level}`).addEventListener('click', () => start(level));
}
el('abort').addEventListener('click', () => {
  runner?.abort();
  el('trial-screen').style.display = 'none';
  el('rest-screen').style.display = 'none';
});
el('download-manifest').addEventListener('click', () => {
  if (lastExport) {
    download(`${lastExport.manifest.subject_id}_n` +
             `${lastExport.manifest.nback_level}.json`, lastExport.manifest);
  }
});
el('download-sync').addEventListener('click', () => {
  if (lastExport) {
    download('sync_log.json', lastExport.syncLog);
  }
});
