if (!window.__adsLoaded) {
  console.error('Uncaught Error: page crash while rendering scores');
}
