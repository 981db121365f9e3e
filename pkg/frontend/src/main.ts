/** Browser entry point: builds the panel grid and wires input events. */

import { Api, SceneState } from './api.js';
import { TrainerApp } from './app.js';
import { SlicePanel } from './panels.js';
import { ALL_VIEWS, ViewName } from './protocol.js';
import { OrbitCamera, drawScene } from './scene3d.js';
import { SteeringController } from './steering.js';
import { formatRecommendations, formatStats, coverageMeter } from './stats.js';
import { StreamClient } from './transport.js';

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
};

function wsUrl(sessionId: number): string {
  const proto = location.protocol === 'https:' ? 'wss' : 'ws';
  return `${proto}://${location.host}/sessions/${sessionId}/stream`;
}

function main(): void {
  const api = new Api('');
  const steering = new SteeringController();
  const panels = new Map<ViewName, SlicePanel>();
  const grid = $('panel-grid');
  for (const view of ALL_VIEWS) {
    const cell = document.createElement('div');
    cell.className = 'panel';
    const label = document.createElement('div');
    label.className = 'panel-label';
    label.textContent = view;
    const canvas = document.createElement('canvas');
    canvas.id = `panel-${view}`;
    cell.append(label, canvas);
    grid.append(cell);
    panels.set(view, new SlicePanel(view, canvas));
  }

  const statusEl = $('status');
  const statsEl = $('stats-body');
  const coverageEl = $('coverage');
  const recsEl = $('recommendations');
  const resultEl = $('exercise-result');

  const app = new TrainerApp({
    api,
    makeStream: (sid) => new StreamClient(wsUrl(sid)),
    panels,
    steering,
    storage: localStorage,
    hooks: {
      onStats: (stats) => {
        statsEl.replaceChildren(
          ...formatStats(stats).map(([k, v]) => {
            const row = document.createElement('tr');
            const kc = document.createElement('td');
            kc.textContent = k;
            const vc = document.createElement('td');
            vc.textContent = v;
            row.append(kc, vc);
            return row;
          }),
        );
        const meter = coverageMeter(stats);
        coverageEl.textContent = `${meter.hit}/${meter.total} sectors`;
      },
      onRecommendations: (recs) => {
        recsEl.replaceChildren(
          ...formatRecommendations(recs).map((line) => {
            const li = document.createElement('li');
            li.textContent = line;
            return li;
          }),
        );
      },
      onPercussion: () => {
        document.body.classList.remove('percussion');
        void document.body.offsetWidth; // restart the flash animation
        document.body.classList.add('percussion');
      },
      onExerciseResult: (result) => {
        resultEl.textContent = result.passed
          ? `passed (score ${result.score.toFixed(2)})`
          : `failed (score ${result.score.toFixed(2)})`;
        resultEl.className = result.passed ? 'pass' : 'fail';
      },
      onError: (message) => {
        statusEl.textContent = `error: ${message}`;
      },
    },
  });

  // probe steering on the probe panel: drag = pitch/yaw, shift-drag = roll,
  // wheel = insertion; the server clamp echo pins the display at limits
  const probeCanvas = $('panel-probe') as unknown as HTMLCanvasElement;
  probeCanvas.addEventListener('pointerdown', (ev) => {
    probeCanvas.setPointerCapture(ev.pointerId);
    steering.pointerDown(ev.clientX, ev.clientY, ev.shiftKey);
  });
  probeCanvas.addEventListener('pointermove', (ev) => steering.pointerMove(ev.clientX, ev.clientY));
  probeCanvas.addEventListener('pointerup', () => steering.pointerUp());
  probeCanvas.addEventListener('wheel', (ev) => {
    ev.preventDefault();
    steering.wheel(ev.deltaY);
  });

  const depthSlider = $('depth') as unknown as HTMLInputElement;
  depthSlider.addEventListener('input', () => {
    app.needleDepth = Number(depthSlider.value);
    $('depth-value').textContent = `${depthSlider.value} mm`;
  });

  window.addEventListener('keydown', (ev) => {
    if (ev.code === 'Space' && app.sessionId !== null) {
      ev.preventDefault();
      app.fire().catch((err) => (statusEl.textContent = `fire failed: ${err.message}`));
    }
  });
  $('fire').addEventListener('click', () => {
    app.fire().catch((err) => (statusEl.textContent = `fire failed: ${err.message}`));
  });

  for (const kind of ['target_hit', 'plane_localization', 'scheme_completion']) {
    $(`ex-${kind}`).addEventListener('click', () => {
      app.startExercise(kind).catch((err) => (statusEl.textContent = `exercise failed: ${err.message}`));
    });
  }
  $('ex-submit').addEventListener('click', () => {
    app.submitExercise().catch((err) => (statusEl.textContent = `submit failed: ${err.message}`));
  });

  // 3D scene: orbit/zoom independent of the probe pose
  const sceneCanvas = $('scene') as unknown as HTMLCanvasElement;
  const camera = new OrbitCamera([40, 40, 40], 260);
  let latestScene: SceneState | null = null;
  let sceneDragging = false;
  let sx = 0;
  let sy = 0;
  sceneCanvas.addEventListener('pointerdown', (ev) => {
    sceneDragging = true;
    sx = ev.clientX;
    sy = ev.clientY;
    sceneCanvas.setPointerCapture(ev.pointerId);
  });
  sceneCanvas.addEventListener('pointermove', (ev) => {
    if (!sceneDragging) {
      return;
    }
    camera.orbit((ev.clientX - sx) * 0.008, (ev.clientY - sy) * 0.008);
    sx = ev.clientX;
    sy = ev.clientY;
  });
  sceneCanvas.addEventListener('pointerup', () => (sceneDragging = false));
  sceneCanvas.addEventListener('wheel', (ev) => {
    ev.preventDefault();
    camera.zoom(ev.deltaY > 0 ? 1.1 : 0.9);
  });

  function renderScene(): void {
    const ctx = sceneCanvas.getContext('2d');
    if (ctx !== null && latestScene !== null) {
      ctx.fillStyle = '#10151d';
      ctx.fillRect(0, 0, sceneCanvas.width, sceneCanvas.height);
      drawScene(ctx, latestScene, camera, { w: sceneCanvas.width, h: sceneCanvas.height }, 2);
    }
    requestAnimationFrame(renderScene);
  }
  renderScene();

  async function pollScene(): Promise<void> {
    if (app.sessionId !== null) {
      try {
        latestScene = await api.scene(app.sessionId);
      } catch {
        /* transient */
      }
    }
    setTimeout(pollScene, 150);
  }
  void pollScene();

  $('start').addEventListener('click', () => {
    const name = ($('operator-name') as unknown as HTMLInputElement).value || 'trainee';
    const level = ($('operator-level') as unknown as HTMLSelectElement).value;
    statusEl.textContent = 'connecting...';
    app
      .start(name, level)
      .then(() => {
        statusEl.textContent = `session ${app.sessionId} open`;
      })
      .catch((err) => {
        statusEl.textContent = `connect failed: ${err.message}`;
      });
  });
}

document.addEventListener('DOMContentLoaded', main);
