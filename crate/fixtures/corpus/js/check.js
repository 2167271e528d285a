window.addEventListener('load', function () {
  if (window.__adsLoaded) return;
  var d = document.createElement('div');
  d.id = 'notice';
  d.className = 'overlay';
  d.textContent = ['Please', 'dis' + 'able', 'your', 'ad' + 'blocker', 'to', 'continue'].join(' ');
  document.body.appendChild(d);
});
